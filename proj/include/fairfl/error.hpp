#pragma once

#include <stdexcept>
#include <string>

namespace fairfl {

// Error taxonomy maps onto CLI exit codes:
//   InputError -> 3, InfeasibleError -> 2, NumericalError -> 4.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& what, std::string certificate = {})
      : std::runtime_error(what), certificate(std::move(certificate)) {}
  std::string certificate;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fairfl

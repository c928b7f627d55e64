#pragma once

#include <stdexcept>

#include "fairfl/lp_instance.hpp"

namespace fairfl {

// The half-space region form presumes sum_y TP > 1 for each (a, c); otherwise
// the simplex vertices are affinely degenerate. Callers catch this and
// rebuild with RegionForm::Barycentric, which is valid unconditionally.
struct DegenerateSimplexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Equalized Odds: fairness rows for every class, region rows per (a, c).
LpInstance build_lp_eo(const AggregatedParams& params, const FairnessSpec& spec,
                       RegionForm form = RegionForm::HalfSpace);

// Equal Opportunity: the class-1 fairness rows only; regions unchanged.
LpInstance build_lp_eop(const AggregatedParams& params, const FairnessSpec& spec,
                        RegionForm form = RegionForm::HalfSpace);

// Statistical Parity over the z^{yj} randomization tables (Eq. 17 family).
LpInstance build_lp_sp(const AggregatedParams& params, const FairnessSpec& spec);

// The (N+1)xN half-space rows and bounds of the simplex spanned by the unit
// vectors and the tp block. Exposed for tests.
void region_half_spaces(const std::vector<double>& tp,
                        std::vector<std::vector<double>>& rows,
                        std::vector<double>& rhs);

}  // namespace fairfl

#pragma once

#include "gridsens/core_model.hpp"

namespace gridsens {

/// Branch-bus incidence matrix: row per branch, +1 at from_bus, -1 at to_bus.
Matrix build_incidence(const Network& net);

/// DC sensitivity (PTDF) matrix with the slack column forced to zero.
///
/// Column j is the line-flow response to a unit injection at bus j withdrawn
/// at the slack bus, with flows oriented from_bus -> to_bus:
///   f = X^-1 A theta,  B = A^T X^-1 A,  B_r theta_r = e_j.
/// B_r is factorized (never inverted). Throws ModelError naming the buses that
/// cannot reach the slack when B_r is singular.
SensitivityMatrix compute_dc_ptdf(const Network& net);

}  // namespace gridsens

#pragma once

// Gradient and proximal kernels of the smooth/non-smooth split
//   s(H, O) = || mask o (H dP + O - dF) ||_F^2
//   g(H, O) = lambda ||H||_* + gamma ||vec(O)||_1 + box indicators.
// The Kronecker form A_P = dP^T (x) I is never materialized.

#include "gridsens/core_model.hpp"

#include <cmath>

namespace gridsens {

/// The stacked variable x = (vec(H), vec(O)), kept in matrix form.
struct StackedIterate {
  Matrix h;  // l x n
  Matrix o;  // l x m

  static StackedIterate zeros(Index lines, Index buses, Index samples) {
    return {Matrix::Zero(lines, buses), Matrix::Zero(lines, samples)};
  }

  /// Euclidean norm of the stacked vector.
  double norm() const { return std::sqrt(h.squaredNorm() + o.squaredNorm()); }
};

StackedIterate operator-(const StackedIterate& a, const StackedIterate& b);

/// Masked residual R = mask o (H dP + O - dF).
Matrix masked_residual(const StackedIterate& x, const MeasurementWindow& w);

/// s(x) = ||R||_F^2.
double smooth_loss(const StackedIterate& x, const MeasurementWindow& w);

/// (grad_H, grad_O) = (2 R dP^T, 2 R).
StackedIterate grad_s(const StackedIterate& x, const MeasurementWindow& w);

/// Entrywise sign(y) max(|y| - threshold, 0), then clipped to [o_min, o_max].
Matrix soft_threshold_box(const Matrix& y, double threshold, double o_min, double o_max);

/// Singular value thresholding U max(S - threshold, 0) V^T.
Matrix svt(const Matrix& y, double threshold);

/// Prox of threshold * ||.||_* + box indicator. SvtThenClip clips the SVT
/// output (approximate); Dykstra alternates the two proxes and converges to
/// the exact composite prox.
Matrix prox_nuclear_box(const Matrix& y, double threshold, double h_min, double h_max,
                        const NuclearProxMode& mode);

double nuclear_norm(const Matrix& m);

/// Entrywise clip.
Matrix clip(const Matrix& y, double lo, double hi);

}  // namespace gridsens

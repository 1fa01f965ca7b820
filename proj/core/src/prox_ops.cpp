#include "gridsens/prox_ops.hpp"

#include "gridsens/errors.hpp"

#include <cmath>
#include <sstream>

namespace gridsens {
namespace {

void check_shapes(const StackedIterate& x, const MeasurementWindow& w) {
  w.check_dimensions();
  if (x.h.rows() != w.lines() || x.h.cols() != w.buses() || x.o.rows() != w.lines() ||
      x.o.cols() != w.samples()) {
    std::ostringstream msg;
    msg << "iterate shape (H " << x.h.rows() << "x" << x.h.cols() << ", O " << x.o.rows() << "x"
        << x.o.cols() << ") does not match window (" << w.lines() << " lines, " << w.buses()
        << " buses, " << w.samples() << " samples)";
    throw ModelError(msg.str());
  }
}

}  // namespace

StackedIterate operator-(const StackedIterate& a, const StackedIterate& b) {
  return {a.h - b.h, a.o - b.o};
}

Matrix masked_residual(const StackedIterate& x, const MeasurementWindow& w) {
  check_shapes(x, w);
  Matrix r = x.h * w.delta_p + x.o - w.delta_f;
  if (!w.fully_observed()) r = w.mask.select(r.array(), 0.0).matrix();
  return r;
}

double smooth_loss(const StackedIterate& x, const MeasurementWindow& w) {
  return masked_residual(x, w).squaredNorm();
}

StackedIterate grad_s(const StackedIterate& x, const MeasurementWindow& w) {
  Matrix r = masked_residual(x, w);
  Matrix gh = 2.0 * r * w.delta_p.transpose();
  return {std::move(gh), 2.0 * r};
}

Matrix clip(const Matrix& y, double lo, double hi) { return y.cwiseMax(lo).cwiseMin(hi); }

Matrix soft_threshold_box(const Matrix& y, double threshold, double o_min, double o_max) {
  const Matrix shrunk =
      y.unaryExpr([threshold](double v) { return std::copysign(std::max(std::abs(v) - threshold, 0.0), v); });
  return clip(shrunk, o_min, o_max);
}

Matrix svt(const Matrix& y, double threshold) {
  if (!y.allFinite()) throw NumericalError("svt: input contains non-finite entries");
  if (threshold == 0.0) return y;
  Eigen::BDCSVD<Matrix> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "svt: SVD failed to converge (" << y.rows() << "x" << y.cols()
        << ", ||y||_F = " << y.norm() << ")";
    throw NumericalError(msg.str());
  }
  const Vector s = (svd.singularValues().array() - threshold).cwiseMax(0.0).matrix();
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

Matrix prox_nuclear_box(const Matrix& y, double threshold, double h_min, double h_max,
                        const NuclearProxMode& mode) {
  if (std::holds_alternative<SvtThenClip>(mode)) return clip(svt(y, threshold), h_min, h_max);

  // Dykstra-like splitting for prox_{f+g}: f = threshold ||.||_*, g = box.
  const int rounds = std::get<Dykstra>(mode).inner_iters;
  Matrix x = y;
  Matrix p = Matrix::Zero(y.rows(), y.cols());
  Matrix q = Matrix::Zero(y.rows(), y.cols());
  for (int k = 0; k < rounds; ++k) {
    const Matrix z = svt(x + p, threshold);
    p = x + p - z;
    const Matrix next = clip(z + q, h_min, h_max);
    q = z + q - next;
    x = next;
  }
  return x;
}

double nuclear_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::BDCSVD<Matrix>(m).singularValues().sum();
}

}  // namespace gridsens

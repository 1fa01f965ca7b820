#include "gridsens/core_model.hpp"
#include "gridsens/errors.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gridsens;

TEST(Network, RejectsInvalidStructure) {
  EXPECT_THROW(Network(1, {}), ModelError);
  EXPECT_THROW(Network(2, {{1, 0, 1, 1.0}}, 2), ModelError);
  EXPECT_THROW(Network(2, {{1, 0, 2, 1.0}}), ModelError);
  EXPECT_THROW(Network(2, {{1, 1, 1, 1.0}}), ModelError);
  EXPECT_THROW(Network(2, {{1, 0, 1, 1.0}}, 0, {1.0}), ModelError);
}

TEST(Network, ZeroReactanceErrorNamesBranch) {
  try {
    Network(3, {{1, 0, 1, 1.0}, {7, 1, 2, 0.0}});
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("branch 7"), std::string::npos) << e.what();
  }
}

TEST(Network, ScaledReactanceTouchesOneBranch) {
  const Network net = fixtures::wecc9();
  const Network scaled = net.with_scaled_reactance(4, 2.0);
  for (Index i = 0; i < net.n_branches(); ++i) {
    const double expected = net.branches()[i].reactance * (i == 4 ? 2.0 : 1.0);
    EXPECT_DOUBLE_EQ(scaled.branches()[i].reactance, expected);
  }
  EXPECT_THROW(net.with_scaled_reactance(9, 2.0), ModelError);
}

TEST(ForwardModel, IdentityNoiseFree) {
  const SensitivityMatrix h{Matrix::Identity(2, 2)};
  EXPECT_EQ(forward_model(h, Matrix::Identity(2, 2)), Matrix::Identity(2, 2));
}

TEST(ForwardModel, AddsOutliers) {
  const SensitivityMatrix h{Matrix::Identity(2, 2)};
  OutlierMatrix o{Matrix::Zero(2, 2)};
  o.o(0, 1) = 5.0;
  Matrix expected = Matrix::Identity(2, 2);
  expected(0, 1) = 5.0;
  EXPECT_EQ(forward_model(h, Matrix::Identity(2, 2), &o), expected);
}

TEST(ForwardModel, RejectsShapeMismatch) {
  const SensitivityMatrix h{Matrix::Zero(3, 4)};
  EXPECT_THROW(forward_model(h, Matrix::Zero(3, 2)), ModelError);
}

TEST(ForwardModel, LinearInDeltaP) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const SensitivityMatrix h{fixtures::gaussian(4, 5, rng)};
    const Matrix a = fixtures::gaussian(5, 3, rng);
    const Matrix b = fixtures::gaussian(5, 3, rng);
    const double s = fixtures::gaussian(1, 1, rng)(0, 0);
    const Matrix lhs = forward_model(h, a + s * b);
    const Matrix rhs = forward_model(h, a) + s * forward_model(h, b);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ForwardModel, NoiseHasRequestedSpread) {
  Rng rng(5);
  const SensitivityMatrix h{Matrix::Zero(50, 2)};
  const Matrix f = forward_model(h, Matrix::Zero(2, 400), nullptr, 0.5, &rng);
  const double sd = std::sqrt(f.squaredNorm() / static_cast<double>(f.size()));
  EXPECT_NEAR(sd, 0.5, 0.02);
  EXPECT_THROW(forward_model(h, Matrix::Zero(2, 2), nullptr, 0.5, nullptr), ModelError);
}

TEST(ValidateWindow, ReportsNonFiniteWithOneBasedPosition) {
  Matrix df = Matrix::Zero(2, 3);
  df(0, 2) = std::nan("");
  const MeasurementWindow w(df, Matrix::Identity(3, 3));
  const auto d = validate_window(w);
  ASSERT_EQ(d.non_finite.size(), 1u);
  EXPECT_EQ(d.non_finite[0].row, 0);
  EXPECT_EQ(d.non_finite[0].col, 2);
  EXPECT_EQ(d.messages.front(), "non-finite flow at line 1, time 3");
  EXPECT_FALSE(d.ok());
}

TEST(ValidateWindow, MaskedNaNIsNotAnError) {
  Matrix df = Matrix::Zero(2, 3);
  df(1, 1) = std::nan("");
  Mask mask = Mask::Constant(2, 3, true);
  mask(1, 1) = false;
  const auto d = validate_window(MeasurementWindow(df, Matrix::Identity(3, 3), mask));
  EXPECT_TRUE(d.non_finite.empty());
  EXPECT_NEAR(d.mask_coverage, 5.0 / 6.0, 1e-15);
  EXPECT_TRUE(d.ok());
}

TEST(ValidateWindow, FlagsUnderdetermined) {
  Rng rng(1);
  const auto d = validate_window(MeasurementWindow(Matrix::Zero(9, 5), fixtures::gaussian(9, 5, rng)));
  EXPECT_TRUE(d.underdetermined);
  EXPECT_EQ(d.rank_delta_p, 5);
  EXPECT_EQ(d.messages.back(), "underdetermined: rank ≤ 5 < 9");
}

TEST(ValidateWindow, FlagsDimensionMismatch) {
  MeasurementWindow w;
  w.delta_f = Matrix::Zero(2, 3);
  w.delta_p = Matrix::Zero(2, 4);
  w.mask = Mask::Constant(2, 3, true);
  EXPECT_FALSE(validate_window(w).dimensions_consistent);
  EXPECT_THROW(w.check_dimensions(), ModelError);
}

TEST(RelativeErrors, NaNForZeroTruthColumn) {
  Matrix truth(2, 3);
  truth << 0, 1, 3, 0, 0, 4;
  Matrix est = truth;
  est(0, 1) = 2.0;
  const Vector re = relative_errors(est, truth);
  EXPECT_TRUE(std::isnan(re(0)));
  EXPECT_DOUBLE_EQ(re(1), 1.0);
  EXPECT_DOUBLE_EQ(re(2), 0.0);
  EXPECT_DOUBLE_EQ(finite_median(re), 0.5);
}

TEST(FiniteMedian, OddEvenAndEmpty) {
  Vector v(5);
  v << 5, 1, std::nan(""), 3, 2;
  EXPECT_DOUBLE_EQ(finite_median(v), 2.5);
  EXPECT_DOUBLE_EQ(finite_median(v.head(2)), 3.0);
  EXPECT_TRUE(std::isnan(finite_median(Vector::Constant(2, std::nan("")))));
}

TEST(EstimatorConfig, DefaultsAndValidation) {
  EstimatorConfig cfg;
  EXPECT_EQ(cfg.h_min, -1.0);
  EXPECT_EQ(cfg.h_max, 1.0);
  EXPECT_EQ(cfg.o_min, -10.0);
  EXPECT_EQ(cfg.o_max, 10.0);
  EXPECT_EQ(cfg.max_iters, 5000);
  EXPECT_EQ(cfg.rel_tol, 1e-8);
  EXPECT_NO_THROW(cfg.validate());
  cfg.lambda = -1.0;
  EXPECT_THROW(cfg.validate(), ModelError);
  cfg.lambda = 0.0;
  cfg.step = FixedStep{0.0};
  EXPECT_THROW(cfg.validate(), ModelError);
}

TEST(EstimatorConfig, DefaultWeightsScaleWithFlows) {
  Matrix df(2, 2);
  df << 3, 0, 0, 4;
  const auto cfg = EstimatorConfig::with_default_weights(MeasurementWindow(df, Matrix::Identity(2, 2)));
  EXPECT_DOUBLE_EQ(cfg.lambda, 0.05);
  EXPECT_DOUBLE_EQ(cfg.gamma, 0.005);
}

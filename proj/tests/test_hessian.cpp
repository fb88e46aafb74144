#include "hbl/hessian.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace hbl;
using namespace hbl::testing;

namespace {

const Background& stage() {
  static const Background bg(2, 16, 2, 1);
  return bg;
}

/// Constant (1,1) curvature F with F_{ba} = F_{ab}^dagger, read off a random
/// Hermitian nr x nr matrix (block (b,a) = F_{ab}), plus a central shift c.
PointForm random_curvature(int n, int r, std::mt19937_64& rng, double spread, double c) {
  const Mat N = spread * random_hermitian_matrix(n * r, rng) + c * Mat::Identity(n * r, n * r);
  PointForm F(n, 1, 1, Mat::Zero(r, r));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) F.at({a}, {b}) = N.block(b * r, a * r, r, r);
  return F;
}

PointForm times_i(PointForm f) {
  for (std::size_t c = 0; c < f.size(); ++c) f[c] *= I;
  return f;
}

/// Coordinates of a (0,1)-form in the basis E_ij dzbar^b.
Vec coordinates(const PointForm& xi) {
  const int n = xi.n(), r = static_cast<int>(xi.zero().rows());
  Vec v(n * r * r);
  for (int b = 0; b < n; ++b)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) v((b * r + i) * r + j) = xi.at({}, {b})(i, j);
  return v;
}

/// Q(xi) evaluated straight through the wedge product with xi^* = conjugate transpose.
double direct_value(const PointForm& iF, const Mat& g, int k, std::span<const int> terms, const PointForm& xi) {
  const int n = iF.n(), r = static_cast<int>(iF.zero().rows());
  PointForm xs(n, 1, 0, Mat::Zero(r, r));
  for (int b = 0; b < n; ++b) xs.at({b}, {}) = xi.at({}, {b}).adjoint();
  PointForm acc(n, k, k, Mat::Zero(r, r));
  for (int t : terms) {
    const Mat one = Mat::Identity(r, r);
    acc += wedge(wedge(wedge(wedge_power(iF, t, one), xs), wedge_power(iF, k - 1 - t, one)), xi);
  }
  const Complex v = I * contract_top(trace(acc), g);
  EXPECT_LT(std::abs(v.imag()), 1e-11 * (1.0 + std::abs(v)));
  return v.real();
}

}  // namespace

TEST(Psi, ConstantBackgroundIsLambda) {
  for (int n = 1; n <= 3; ++n) {
    const Background bg(n, n == 3 ? 8 : 16, 2, 1);
    const Chern c = chern(bg, Metric::identity(bg));
    for (int k = 1; k <= n; ++k) {
      // (pi m)^k n!/(n-k)!
      const double expect = std::pow(pi, k) * factorial(n) / factorial(n - k);
      const GridField psi = psi_k(bg, c, k);
      EXPECT_LT(max_abs_diff(psi, GridField::scalar(bg.grid, 2, expect)), 1e-12 * expect) << n << k;
    }
  }
}

TEST(Psi, TrivialBundleFlatMetric) {
  const Background bg(2, 16, 2, 0);
  EXPECT_EQ(psi_k(bg, Metric::identity(bg), 2).max_abs(), 0.0);
  EXPECT_EQ(psi_k(bg, Metric::identity(bg), 1).max_abs(), 0.0);
}

TEST(Psi, ChernWeilAverage) {
  const auto& bg = stage();
  for (int k = 1; k <= 2; ++k) {
    const double lam = k == 1 ? 2 * pi : 2 * pi * pi;
    for (std::uint64_t seed : {31u, 32u, 33u}) {
      const GridField psi = psi_k(bg, random_metric(bg, seed, 0.3, 1), k);
      EXPECT_NEAR(chern_weil_lambda(bg, psi), lam, 1e-12 * lam) << k;
      EXPECT_LT(std::abs(grid_mean(psi.trace()).imag()), 1e-12 * lam);
    }
  }
}

TEST(Psi, SelfAdjointForBandLimitedMetrics) {
  const auto& bg = stage();
  for (int k = 1; k <= 2; ++k)
    for (std::uint64_t seed : {34u, 35u}) {
      const Residual res = residual(bg, random_metric(bg, seed, 0.3, 1), k, 0.0);
      EXPECT_LT(res.self_adjoint_defect, 1e-9) << k;
    }
}

TEST(Residual, ZeroScaleInvariantAndTraceFree) {
  const auto& bg = stage();
  const Residual zero = residual(bg, Metric::identity(bg), 2, 2 * pi * pi);
  EXPECT_LT(zero.sup_norm, 1e-12);
  EXPECT_LT(zero.l2_norm, 1e-12);

  const Metric H = random_metric(bg, 36, 0.3, 1);
  const Residual a = residual(bg, H, 2, 2 * pi * pi);
  const Residual b = residual(bg, {2.0 * H.h}, 2, 2 * pi * pi);
  EXPECT_EQ(max_abs_diff(a.R, b.R), 0.0);
  EXPECT_NEAR(a.sup_norm, b.sup_norm, 1e-12 * a.sup_norm);
  EXPECT_LT(std::abs(grid_mean(a.R.trace())), 1e-11 * a.sup_norm);
  EXPECT_GT(a.sup_norm, 1.0);
}

TEST(SigmaForm, ConstantModelIsTwoPiIdentity) {
  for (int r = 1; r <= 3; ++r) {
    ScalarForm w = kaehler_form(Mat::Identity(2, 2));
    PointForm iF(2, 1, 1, Mat::Zero(r, r));
    for (std::size_t c = 0; c < iF.size(); ++c) iF[c] = pi * w[c] * Mat::Identity(r, r);
    const Mat Q = sigma_k_form(iF, Mat::Identity(2, 2), 2);
    EXPECT_LT((Q - 2 * pi * Mat::Identity(2 * r * r, 2 * r * r)).cwiseAbs().maxCoeff(), 1e-13) << r;
    EXPECT_NEAR(min_eigenvalue_of(Q), 2 * pi, 1e-12);
    // m = -1 leaves the cone
    for (std::size_t c = 0; c < iF.size(); ++c) iF[c] *= -1.0;
    EXPECT_NEAR(min_eigenvalue_of(sigma_k_form(iF, Mat::Identity(2, 2), 2)), -2 * pi, 1e-12);
  }
}

TEST(SigmaForm, AgreesWithDirectEvaluationAndPolarization) {
  std::mt19937_64 rng(40);
  const Mat g = (Mat(2, 2) << 1.5, Complex(0.3, -0.2), Complex(0.3, 0.2), 0.9).finished();
  for (int trial = 0; trial < 5; ++trial) {
    const PointForm iF = times_i(random_curvature(2, 2, rng, 1.0, 0.0));
    for (int k = 1; k <= 2; ++k) {
      std::vector<int> all;
      for (int t = 0; t < k; ++t) all.push_back(t);
      const Mat Q = sigma_k_form(iF, g, k);
      const PointForm xi = random_point_form(2, 0, 1, 2, rng);
      const Vec c = coordinates(xi);
      EXPECT_NEAR(c.dot(Q * c).real(), direct_value(iF, g, k, all, xi), 1e-11);

      // polarization on the basis reproduces every entry
      const int D = static_cast<int>(Q.rows());
      double worst = 0.0;
      auto value = [&](const Vec& v) {
        PointForm f(2, 0, 1, Mat::Zero(2, 2));
        for (int a = 0; a < D; ++a) f.at({}, {a / 4})((a / 2) % 2, a % 2) = v(a);
        return direct_value(iF, g, k, all, f);
      };
      for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b) {
          const Vec ea = Vec::Unit(D, a), eb = Vec::Unit(D, b);
          const double re = 0.25 * (value(ea + eb) - value(ea - eb));
          const double im = -0.25 * (value(ea + I * eb) - value(ea - I * eb));
          worst = std::max(worst, std::abs(Q(a, b) - Complex(re, im)));
        }
      EXPECT_LT(worst, 1e-11) << k;
    }
  }
}

TEST(SigmaForm, DegreeOneIsTheNormForm) {
  std::mt19937_64 rng(41);
  const PointForm iF = times_i(random_curvature(2, 2, rng, 3.0, -1.0));
  const Mat Q = sigma_k_form(iF, Mat::Identity(2, 2), 1);
  EXPECT_LT((Q - Mat::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((xi_norm_form(Mat::Identity(3, 3), 2) - Mat::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(StronglySigma2, SumIsSigma2AndCentralValues) {
  std::mt19937_64 rng(42);
  const Mat g = Mat::Identity(2, 2);
  for (int trial = 0; trial < 5; ++trial) {
    const PointForm iF = times_i(random_curvature(2, 2, rng, 1.0, 0.5));
    const auto [q1, q2] = strongly_sigma2_forms(iF, g);
    EXPECT_LT((q1 + q2 - sigma_k_form(iF, g, 2)).cwiseAbs().maxCoeff(), 1e-14);
  }
  for (int n = 2; n <= 3; ++n) {
    // i F = pi m omega Id: each form is pi m (n - 1) |xi|^2
    const Mat gn = Mat::Identity(n, n);
    const ScalarForm w = kaehler_form(gn);
    PointForm iF(n, 1, 1, Mat::Zero(2, 2));
    for (std::size_t c = 0; c < iF.size(); ++c) iF[c] = pi * w[c] * Mat::Identity(2, 2);
    const auto [q1, q2] = strongly_sigma2_forms(iF, gn);
    EXPECT_NEAR(min_eigenvalue_of(q1), pi * (n - 1), 1e-12);
    EXPECT_NEAR(min_eigenvalue_of(q2), pi * (n - 1), 1e-12);
  }
}

TEST(StronglySigma2, OneSidedPositiveIsNotEnough) {
  // Search for a constant curvature whose first form is PD but the second is not.
  std::mt19937_64 rng(43);
  const Mat g = Mat::Identity(2, 2);
  bool found = false;
  for (int trial = 0; trial < 20000 && !found; ++trial) {
    const PointForm iF = times_i(random_curvature(2, 2, rng, 1.0, 0.3));
    const auto [q1, q2] = strongly_sigma2_forms(iF, g);
    if (min_eigenvalue_of(q1) > 1e-3 && min_eigenvalue_of(q2) < -1e-3) {
      found = true;
      EXPECT_GT(min_eigenvalue_of(q1), 0.0);
      // the verdict needs both
      EXPECT_LT(std::min(min_eigenvalue_of(q1), min_eigenvalue_of(q2)), 0.0);
    }
  }
  EXPECT_TRUE(found);
}

TEST(Nakano, IdentityCurvatureAndLineBundles) {
  // i F = omega Id  <=>  F_{ab} = g_{ab} Id
  for (const Mat& g : {Mat(Mat::Identity(2, 2)),
                       Mat((Mat(2, 2) << 2.0, Complex(0.5, 0.3), Complex(0.5, -0.3), 1.0).finished())}) {
    PointForm F(2, 1, 1, Mat::Zero(2, 2));
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) F.at({a}, {b}) = g(a, b) * Mat::Identity(2, 2);
    EXPECT_LT((nakano_form(F, g) - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((dual_nakano_form(F, g) - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-14);
  }
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 5; ++trial) {
    const PointForm F = random_curvature(3, 1, rng, 1.0, 0.0);
    // the two forms are transposes of each other: same spectrum, same verdict
    const Mat a = nakano_form(F, Mat::Identity(3, 3)), b = dual_nakano_form(F, Mat::Identity(3, 3));
    EXPECT_LT((a.transpose() - b).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Mat> ea(a), eb(b);
    EXPECT_LT((ea.eigenvalues() - eb.eigenvalues()).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(IndexOracle, MatchesWedgePipeline) {
  std::mt19937_64 rng(45);
  for (int n = 2; n <= 3; ++n) {
    const Mat g = Mat::Identity(n, n);
    for (int trial = 0; trial < 20; ++trial) {
      const PointForm F = random_curvature(n, 2, rng, 1.0, 0.2);
      const auto [q1, q2] = strongly_sigma2_forms(times_i(F), g);
      const PointForm xi = random_point_form(n, 0, 1, 2, rng);
      const Vec c = coordinates(xi);
      const auto [n1, n3] = n1_n3_index_oracle(F, xi);
      EXPECT_NEAR(c.dot(q1 * c).real(), n1, 1e-12 * (1.0 + std::abs(n1)));
      EXPECT_NEAR(c.dot(q2 * c).real(), n3, 1e-12 * (1.0 + std::abs(n3)));
    }
  }
  // central F = c Id: each sum is c (n-1) |xi|^2; xi = 0 gives zero
  std::mt19937_64 r2(46);
  PointForm F(2, 1, 1, Mat::Zero(2, 2));
  F.at({0}, {0}) = F.at({1}, {1}) = 1.7 * Mat::Identity(2, 2);
  const PointForm xi = random_point_form(2, 0, 1, 2, r2);
  const double norm2 = coordinates(xi).squaredNorm();
  const auto [a, b] = n1_n3_index_oracle(F, xi);
  EXPECT_NEAR(a, 1.7 * norm2, 1e-12);
  EXPECT_NEAR(b, 1.7 * norm2, 1e-12);
  const auto [z1, z3] = n1_n3_index_oracle(F, PointForm(2, 0, 1, Mat::Zero(2, 2)));
  EXPECT_EQ(z1, 0.0);
  EXPECT_EQ(z3, 0.0);
}

TEST(Positivity, ConstantAndPerturbedBackgrounds) {
  const auto& bg = stage();
  const auto sample = strided_sample(bg.grid, 512);
  const Chern c = chern(bg, Metric::identity(bg));
  const PositivityReport s2 = positivity(bg, c, Cone::SigmaK, 2, sample);
  EXPECT_TRUE(s2.positive);
  EXPECT_NEAR(s2.global_min, 2 * pi, 1e-12);
  EXPECT_NEAR(positivity(bg, c, Cone::StronglySigma2, 2, sample).global_min, pi, 1e-12);
  EXPECT_NEAR(positivity(bg, c, Cone::Nakano, 1, sample).global_min, pi, 1e-12);
  EXPECT_NEAR(positivity(bg, c, Cone::DualNakano, 1, sample).global_min, pi, 1e-12);

  const Background neg = bg.with_bundle(2, -1);
  const PositivityReport out = positivity(neg, chern(neg, Metric::identity(neg)), Cone::SigmaK, 2, sample);
  EXPECT_FALSE(out.positive);

  // a small perturbation stays in the cone with a slightly reduced margin
  const PositivityReport p = positivity(bg, chern(bg, random_metric(bg, 47, 0.05, 1)), Cone::SigmaK, 2, sample);
  EXPECT_TRUE(p.positive);
  EXPECT_LT(p.global_min, 2 * pi);
  EXPECT_EQ(default_sample(bg.grid).size(), bg.grid.points());
}

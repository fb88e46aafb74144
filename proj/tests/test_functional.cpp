#include "hbl/functional.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace hbl;
using namespace hbl::testing;

namespace {

const Background& stage() {
  static const Background bg(2, 16, 2, 1);
  return bg;
}

GridField direction(const Background& bg, const Metric& H, std::uint64_t seed, double amp = 1.0) {
  return self_adjoint_direction(bg, H, random_hermitian_field(bg.grid, bg.rank, seed, 1, amp));
}

}  // namespace

TEST(GaussLegendre, ExactForLowDegree) {
  const Quadrature q2 = gauss_legendre(2);
  EXPECT_NEAR(q2.nodes[0], 0.5 - 0.5 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(q2.weights[0], 0.5, 1e-15);
  for (int Q : {2, 3, 8, 16}) {
    const Quadrature q = gauss_legendre(Q);
    for (int d = 0; d < 2 * Q; ++d) {
      double s = 0.0;
      for (int j = 0; j < Q; ++j) s += q.weights[j] * std::pow(q.nodes[j], d);
      EXPECT_NEAR(s, 1.0 / (d + 1), 1e-14) << Q << " " << d;
    }
    EXPECT_TRUE(std::is_sorted(q.nodes.begin(), q.nodes.end()));
  }
  EXPECT_THROW(gauss_legendre(1), ConfigError);
}

TEST(Lambda, AnalyticValues) {
  const auto& bg = stage();
  EXPECT_NEAR(lambda_k(bg, 1), 2 * pi, 1e-12);
  EXPECT_NEAR(lambda_k(bg, 2), 2 * pi * pi, 1e-12);
  EXPECT_NEAR(lambda_analytic(bg, 1), 2 * pi, 1e-13);
  EXPECT_NEAR(lambda_analytic(bg, 2), 2 * pi * pi, 1e-13);
  const Background flat(2, 8, 2, 0);
  EXPECT_EQ(lambda_k(flat, 1), 0.0);
  EXPECT_EQ(lambda_k(flat, 2), 0.0);
  // n = 3: (pi m)^k 3!/(3-k)!
  const Background b3(3, 8, 1, 2);
  for (int k = 1; k <= 3; ++k)
    EXPECT_NEAR(lambda_k(b3, k), std::pow(2 * pi, k) * 6.0 / factorial(3 - k), 1e-10 * std::pow(2 * pi, k) * 6);
  EXPECT_THROW(lambda_k(bg, 3), ConfigError);
}

TEST(Lambda, MetricIndependentAndGeneralKaehler) {
  const auto& bg = stage();
  for (int k = 1; k <= 2; ++k) {
    const double base = lambda_k(bg, k);
    for (std::uint64_t seed : {51u, 52u})
      EXPECT_NEAR(lambda_k(bg, k, random_metric(bg, seed, 0.3, 1)), base, 1e-8 * base);
  }
  const Mat g = (Mat(2, 2) << 1.4, Complex(0.2, 0.3), Complex(0.2, -0.3), 0.8).finished();
  const Background bg2(2, 8, 2, 1, g);
  for (int k = 1; k <= 2; ++k) {
    const double a = lambda_analytic(bg2, k);
    EXPECT_NEAR(lambda_k(bg2, k), a, 1e-12 * std::abs(a));
    EXPECT_NEAR(lambda_k(bg2, k, random_metric(bg2, 53, 0.2, 1)), a, 1e-8 * std::abs(a));
  }
  // k = 1 with a general metric: pi m tr(g^{-1})
  EXPECT_NEAR(lambda_analytic(bg2, 1), pi * g.inverse().trace().real(), 1e-13);
}

TEST(Slope, EqualFactorsAreStrictlySemistable) {
  const auto& bg = stage();
  const std::vector<int> levels{1, 1, 1};
  for (int k = 1; k <= 2; ++k) {
    const StabilityReport rep = stability(bg, levels, k);
    EXPECT_EQ(rep.verdict, Stability::StrictlySemistable);
    for (const auto& s : rep.slopes) EXPECT_NEAR(s.slope, rep.total.slope, 1e-12);
  }
}

TEST(Slope, SplitLevelsOneTwo) {
  const auto& bg = stage();
  const std::vector<int> levels{1, 2};
  const std::size_t one[] = {0}, two[] = {1};
  EXPECT_NEAR(deg_slope(bg, levels, one, 1).normalized, 2 * pi, 1e-13);
  EXPECT_NEAR(deg_slope(bg, levels, two, 1).normalized, 4 * pi, 1e-13);
  // deg_1(L_m) = (m/2) * 2 * vol with vol = 4
  EXPECT_NEAR(deg_slope(bg, levels, one, 1).degree, 4.0, 1e-13);
  const StabilityReport rep = stability(bg, levels, 1);
  EXPECT_EQ(rep.verdict, Stability::Unstable);
  ASSERT_EQ(rep.destabilizing.size(), 1u);
  EXPECT_EQ(rep.destabilizing[0], std::vector<std::size_t>{1});
  const std::size_t none[] = {0};
  EXPECT_THROW(deg_slope(bg, levels, std::span<const std::size_t>(none, 0), 1), ConfigError);
}

TEST(Slope, TopDegreeMatchesLambdaPipeline) {
  // deg_n of a sum of line factors against lambda of each factor run as a rank-1 bundle
  const auto& bg = stage();
  const std::vector<int> levels{1, 3, -2};
  const int k = 2;
  const std::size_t sub[] = {0, 2};
  double pipeline = 0.0;
  for (std::size_t i : sub) {
    const Background line = bg.with_bundle(1, levels[i]);
    const double lam = lambda_k(line, k, random_metric(line, 60 + i, 0.2, 1));
    pipeline += lam * line.volume() / (std::pow(2 * pi, k) * factorial(k));
  }
  EXPECT_NEAR(deg_slope(bg, levels, sub, k).degree, pipeline, 1e-9 * std::abs(pipeline));
}

TEST(Donaldson, NormalisationUnderScaling) {
  const auto& bg = stage();
  const Metric H = random_metric(bg, 61, 0.3, 1);
  for (int k = 1; k <= 2; ++k) {
    const double lam = lambda_k(bg, k);
    for (double a : {0.5, 2.0}) {
      const Metric aH{a * H.h};
      EXPECT_LT(std::abs(donaldson_M(bg, H, aH, k, {PathKind::Geodesic, 8, {}}, lam).M), 1e-10) << k << a;
      EXPECT_LT(std::abs(donaldson_M(bg, H, aH, k, {PathKind::Linear, 8, {}}, lam).M), 1e-10) << k << a;
    }
  }
}

TEST(Donaldson, CocycleAndPathIndependence) {
  const auto& bg = stage();
  const Metric H0 = random_metric(bg, 62, 0.3, 1), H1 = random_metric(bg, 63, 0.3, 1),
               H2 = random_metric(bg, 64, 0.3, 1);
  for (int k = 1; k <= 2; ++k) {
    const double lam = lambda_k(bg, k);
    const PathSpec geo{PathKind::Geodesic, 8, {}};
    const double a = donaldson_M(bg, H0, H1, k, geo, lam).M;
    const double b = donaldson_M(bg, H1, H2, k, geo, lam).M;
    const double c = donaldson_M(bg, H0, H2, k, geo, lam).M;
    const double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
    EXPECT_LT(std::abs(a + b - c), 1e-8 * scale) << k;

    const FunctionalReport lin = donaldson_M(bg, H0, H2, k, {PathKind::Linear, 8, {}}, lam);
    const FunctionalReport wp = donaldson_M(bg, H0, H2, k, {PathKind::Waypoint, 8, {H1}}, lam);
    EXPECT_LT(std::abs(lin.M - c), 1e-8 * std::abs(c));
    EXPECT_LT(std::abs(wp.M - c), 1e-8 * std::abs(c));
    EXPECT_EQ(wp.segments, 2u);
    EXPECT_DOUBLE_EQ(lin.M, lin.M0 - lin.logdet_term);
    EXPECT_LT(std::abs(lin.M0_imag), 1e-10);
    // quadrature refinement
    EXPECT_LT(std::abs(donaldson_M(bg, H0, H2, k, {PathKind::Linear, 16, {}}, lam).M - lin.M), 1e-10);
  }
}

TEST(Donaldson, CsvRow) {
  FunctionalReport r;
  r.k = 2;
  r.kind = PathKind::Linear;
  r.nodes = 8;
  r.M0 = 0.5;
  r.logdet_term = 0.25;
  r.M = 0.25;
  r.lambda = 0.1;
  EXPECT_EQ(functional_csv_header(), "k,path_kind,Q,M0,logdet_term,M,lambda");
  EXPECT_EQ(functional_csv_row(r), "2,linear,8,0.5,0.25,0.25,0.10000000000000001");
  EXPECT_EQ(parse_path_kind("waypoint"), PathKind::Waypoint);
  EXPECT_THROW(parse_path_kind("spline"), ConfigError);
}

TEST(FirstVariation, CriticalPointsAndCentralDirections) {
  const auto& bg = stage();
  const Metric Id = Metric::identity(bg);
  for (int k = 1; k <= 2; ++k) {
    const double lam = lambda_k(bg, k);
    EXPECT_LT(std::abs(first_variation(bg, Id, direction(bg, Id, 70), k, lam)), 1e-12);
    const Metric H = random_metric(bg, 71, 0.3, 1);
    EXPECT_LT(std::abs(first_variation(bg, H, GridField::scalar(bg.grid, 2, 0.7), k, lam)), 1e-11 * lam);
  }
}

TEST(FirstVariation, MatchesFiniteDifference) {
  const auto& bg = stage();
  const Metric H0 = random_metric(bg, 72, 0.3, 1), H = random_metric(bg, 73, 0.3, 1);
  const PathSpec geo{PathKind::Geodesic, 8, {}};
  for (int k = 1; k <= 2; ++k) {
    const double lam = lambda_k(bg, k);
    const GridField s = direction(bg, H, 74 + k);
    auto M = [&](double t) { return donaldson_M(bg, H0, perturb(bg, H, s, t), k, geo, lam).M; };
    const double d = 1e-4;
    const double d1 = (M(d) - M(-d)) / (2 * d), d2 = (M(2 * d) - M(-2 * d)) / (4 * d);
    const double fd = (4 * d1 - d2) / 3;
    const double exact = first_variation(bg, H, s, k, lam);
    EXPECT_LT(std::abs(fd - exact), 1e-6 * std::abs(exact)) << k << " " << exact;
  }
}

TEST(SecondVariation, CentralDirectionVanishes) {
  const auto& bg = stage();
  const Metric H = random_metric(bg, 80, 0.3, 1);
  EXPECT_LT(std::abs(second_variation_geodesic(bg, H, {1.5 * H.h}, 2, 0.4)), 1e-10);
  EXPECT_LT(std::abs(second_variation_geodesic(bg, H, {1.5 * H.h}, 1, 0.4)), 1e-10);
}

TEST(SecondVariation, MatchesFiniteDifferenceOfIncrements) {
  const auto& bg = stage();
  const Metric H = random_metric(bg, 81, 0.3, 1);
  const PathSpec geo{PathKind::Geodesic, 8, {}};
  for (int k = 1; k <= 2; ++k) {
    const double lam = lambda_k(bg, k);
    const Metric K = perturb(bg, H, direction(bg, H, 82 + k), 0.5);
    const Geodesic g(bg, H, K);
    const double t = 0.4;
    const Metric Ht = g.at(t);
    // M(H0, H(t+d)) - M(H0, H(t)) = M(H(t), H(t+d)) by the cocycle identity
    auto D = [&](double d) {
      return (donaldson_M(bg, Ht, g.at(t + d), k, geo, lam).M + donaldson_M(bg, Ht, g.at(t - d), k, geo, lam).M) /
             (d * d);
    };
    const double d = 1e-4;
    const double fd = (4 * D(d) - D(2 * d)) / 3;
    const double exact = second_variation_geodesic(bg, H, K, k, t);
    EXPECT_LT(std::abs(fd - exact), 1e-5 * std::abs(exact)) << k << " " << exact << " " << fd;
  }
}

TEST(SecondVariation, ConstantModelMatchesSigmaForm) {
  // At the constant solution the k=2 second variation is int Q(dbar s) with Q = 2 pi Id.
  const auto& bg = stage();
  const Metric Id = Metric::identity(bg);
  const GridField s = random_hermitian_field(bg.grid, 2, 85, 1, 0.3);
  const Metric K = perturb(bg, Id, s, 1.0);
  const double v = second_variation_geodesic(bg, Id, K, 2, 0.0);
  EXPECT_GT(v, 0.0);
  const EndForm dbs = dbar(as_form(s));
  const Chern c = chern(bg, Id);
  const EndForm iF = c.iF();
  const Mat Q = sigma_k_form(frame_form(iF, c.h, 0), bg.kaehler, 2);
  std::vector<double> density(bg.grid.points());
  for (std::size_t p = 0; p < density.size(); ++p) {
    Vec x(8);
    for (int b = 0; b < 2; ++b)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) x((b * 2 + i) * 2 + j) = dbs[b](p, i, j);
    density[p] = x.dot(Q * x).real();
  }
  const double expect = integrate_volume(density, bg);
  EXPECT_NEAR(v, expect, 1e-10 * expect);
}

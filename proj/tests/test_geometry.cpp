#include "support.hpp"

#include <gtest/gtest.h>

using namespace hbl;
using namespace hbl::testing;

namespace {

GridField mode(const Grid& grid, int r, int dim) {
  return GridField::sample(grid, r, [&](std::span<const double> x) {
    return Mat(std::exp(2.0 * pi * I * x[dim]) * Mat::Identity(r, r));
  });
}

}  // namespace

TEST(Del, ConstantGivesZero) {
  const Grid grid{2, 8};
  const EndForm f = as_form(GridField::constant(grid, Mat::Constant(2, 2, Complex(1.5, -2.0))));
  EXPECT_LT(max_abs(del(f)), 1e-14);
  EXPECT_LT(max_abs(dbar(f)), 1e-14);
}

TEST(Del, SingleFourierMode) {
  const Grid grid{2, 8};
  const GridField e = mode(grid, 2, 0);
  const EndForm d = del(as_form(e));
  EXPECT_LT(max_abs_diff(d.at({0}, {}), Complex(0.0, pi) * e), 1e-13);
  EXPECT_LT(d.at({1}, {}).max_abs(), 1e-13);

  const EndForm db = dbar(as_form(e));
  EXPECT_LT(max_abs_diff(db.at({}, {0}), Complex(0.0, pi) * e), 1e-13);

  // y-direction: d/dz = (d/dx - i d/dy)/2 gives +pi, d/dzbar gives -pi.
  const GridField ey = mode(grid, 1, 1);
  EXPECT_LT(max_abs_diff(del(as_form(ey)).at({0}, {}), pi * ey), 1e-13);
  EXPECT_LT(max_abs_diff(dbar(as_form(ey)).at({}, {0}), -pi * ey), 1e-13);
}

TEST(Del, AnticommutationAndNilpotence) {
  for (int n = 1; n <= 3; ++n) {
    const Grid grid{n, n == 3 ? 4 : 8};
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) {
        const EndForm f = random_form(grid, 2, p, q, 17 + 10 * p + q, 1);
        const double scale = max_abs(f) * pi * pi;
        EXPECT_LT(max_abs(dbar(del(f)) + del(dbar(f))), 1e-12 * scale) << n << p << q;
        if (q + 2 <= n) EXPECT_LT(max_abs(dbar(dbar(f))), 1e-12 * scale);
        if (p + 2 <= n) EXPECT_LT(max_abs(del(del(f))), 1e-12 * scale);
      }
  }
}

TEST(Del, DegreeOverflowIsZeroForm) {
  const Grid grid{1, 8};
  const EndForm f = random_form(grid, 1, 1, 0, 3, 1);
  EXPECT_EQ(del(f).size(), 0u);
}

TEST(Wedge, UnitAndBilinear) {
  std::mt19937_64 rng(5);
  const PointForm b = random_point_form(2, 1, 1, 2, rng);
  PointForm one(2, 0, 0, Mat::Zero(2, 2));
  one[0] = Mat::Identity(2, 2);
  EXPECT_LT(max_abs(wedge(one, b) - b), 1e-15);
  EXPECT_LT(max_abs(wedge(b, one) - b), 1e-15);
}

TEST(Wedge, MatchesShuffleOracleUpToThree) {
  std::mt19937_64 rng(11);
  for (int n = 1; n <= 3; ++n)
    for (int p = 0; p <= n; ++p)
      for (int q = 0; q <= n; ++q)
        for (int p2 = 0; p2 <= n; ++p2)
          for (int q2 = 0; q2 <= n; ++q2) {
            const PointForm a = random_point_form(n, p, q, 2, rng);
            const PointForm b = random_point_form(n, p2, q2, 2, rng);
            const PointForm w = wedge(a, b);
            const WordForm oracle = word_wedge(to_words(a), to_words(b), 2);
            const WordForm got = w.size() ? to_words(w) : WordForm{};
            EXPECT_LT(word_distance(got, oracle), 1e-12) << n << p << q << p2 << q2;
          }
}

TEST(Wedge, Associative) {
  std::mt19937_64 rng(12);
  const PointForm a = random_point_form(3, 1, 0, 2, rng);
  const PointForm b = random_point_form(3, 0, 1, 2, rng);
  const PointForm c = random_point_form(3, 1, 1, 2, rng);
  EXPECT_LT(max_abs(wedge(wedge(a, b), c) - wedge(a, wedge(b, c))), 1e-12);
}

TEST(Wedge, TraceOfCurvatureSquareMatchesIndexSum) {
  std::mt19937_64 rng(13);
  const PointForm F = random_point_form(2, 1, 1, 3, rng);
  const ScalarForm t = trace(wedge(F, F));
  // F^F on dz1 dz2 dzbar1 dzbar2: sum over a != b, c != d of
  // sign(a b c d) F_{a cbar} F_{b dbar} with the reorder dz^a dzbar^c dz^b dzbar^d.
  Complex oracle = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) {
          if (a == b || c == d) continue;
          Word w{a, 2 + c, b, 2 + d};
          const int s = bubble_sort(w);
          oracle += static_cast<double>(s) * (F.at({a}, {c}) * F.at({b}, {d})).trace();
        }
  EXPECT_LT(std::abs(t.at({0, 1}, {0, 1}) - oracle), 1e-12);
}

TEST(Trace, IdentityAndCyclicity) {
  const Grid grid{2, 8};
  const GridField phi = random_band_limited(grid, 1, 4, 2, false);
  EXPECT_LT(max_abs_diff(phi.times_identity(3).trace(), 3.0 * phi), 1e-13);
  const GridField a = random_band_limited(grid, 2, 5, 2, false);
  const GridField b = random_band_limited(grid, 2, 6, 2, false);
  const GridField ab = multiply(a, b).trace();
  EXPECT_LT(max_abs_diff(ab, multiply(b, a).trace()), 1e-14 * ab.max_abs());
}

TEST(Contract, KaehlerPowerNormalisation) {
  const Mat g = (Mat(2, 2) << 1.3, Complex(0.2, 0.1), Complex(0.2, -0.1), 0.8).finished();
  for (int k = 0; k <= 2; ++k) {
    const ScalarForm w = kaehler_power(g, k);
    PointForm f(2, k, k, Mat::Zero(2, 2));
    for (std::size_t c = 0; c < f.size(); ++c) f[c] = w[c] * Mat::Identity(2, 2);
    // omega^k/k! ^ omega^{n-k}/(n-k)! = C(n,k) omega^n/n!
    const double expect = static_cast<double>(binomial(2, k));
    EXPECT_LT((contract_top(f, g) - expect * Mat::Identity(2, 2)).norm(), 1e-14) << k;
  }
}

TEST(Contract, SingleDiagonalComponent) {
  PointForm f(2, 1, 1, Mat::Zero(2, 2));
  f.at({0}, {0}) = I * Mat::Identity(2, 2);
  EXPECT_LT((contract_top(f, Mat::Identity(2, 2)) - Mat::Identity(2, 2)).norm(), 1e-15);
}

TEST(Contract, ConstantCurvatureSquare) {
  const int m = 1;
  ScalarForm w = kaehler_form(Mat::Identity(2, 2));
  w *= Complex(pi * m);
  const ScalarForm w2 = wedge(w, w);
  PointForm f(2, 2, 2, Mat::Zero(2, 2));
  f[0] = w2[0] * Mat::Identity(2, 2);
  EXPECT_LT((contract_top(f, Mat::Identity(2, 2)) - 2.0 * pi * pi * Mat::Identity(2, 2)).norm(), 1e-12);
}

TEST(Contract, GeneralMetricTraceIsInverse) {
  // Contracting i dz^a ^ dzbar^b against a general g picks out (g^{-1})_{ba}.
  const Mat g = (Mat(2, 2) << 2.0, Complex(0.5, 0.3), Complex(0.5, -0.3), 1.0).finished();
  const Mat gi = g.inverse();
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      ScalarForm f(2, 1, 1, Complex{});
      f.at({a}, {b}) = I;
      EXPECT_LT(std::abs(contract_top(f, g) - gi(b, a)), 1e-14);
    }
}

TEST(Integrate, VolumeForm) {
  const Grid grid{2, 8};
  const ScalarForm w = wedge(kaehler_form(Mat::Identity(2, 2)), kaehler_form(Mat::Identity(2, 2)));
  ScalarForm half = w;
  half *= 0.5;
  EXPECT_NEAR(integrate(lift(half, grid, 1)).real(), 4.0, 1e-13);
  EXPECT_NEAR(integrate(lift(half, grid, 1)).imag(), 0.0, 1e-13);

  ScalarForm a(2, 1, 1, Complex{}), b(2, 1, 1, Complex{});
  a.at({0}, {0}) = I;
  b.at({1}, {1}) = I;
  EXPECT_NEAR(integrate(lift(wedge(a, b), grid, 1)).real(), 4.0, 1e-13);

  const Mat g = (Mat(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
  const Background bg(2, 8, 1, 0, g);
  EXPECT_NEAR(integrate(lift(kaehler_power(g, 2), grid, 1)).real(), bg.volume(), 1e-12);
  EXPECT_NEAR(bg.volume(), 7.0, 1e-14);

  const Background bg1(2, 8, 1, 0);
  EXPECT_NEAR(integrate_volume(GridField::scalar(grid, 1, 2.5), bg1).real(), 10.0, 1e-13);
}

TEST(Integrate, Stokes) {
  for (int n = 1; n <= 3; ++n) {
    const Grid grid{n, n == 3 ? 4 : 8};
    const EndForm f = random_form(grid, 1, n, n - 1, 31 + n, 1);
    const EndForm g = random_form(grid, 1, n - 1, n, 41 + n, 1);
    EXPECT_LT(std::abs(integrate(dbar(f))), 1e-10 * max_abs(f));
    EXPECT_LT(std::abs(integrate(del(g))), 1e-10 * max_abs(g));
  }
}

TEST(Adjoint, IdentityMetricIsConjugateTranspose) {
  const Grid grid{2, 8};
  const EndForm xi = random_form(grid, 2, 0, 1, 7, 1);
  const GridField id = GridField::identity(grid, 2);
  const EndForm a = adjoint_form(xi, id, id);
  ASSERT_EQ(a.p(), 1);
  for (std::size_t c = 0; c < xi.size(); ++c) EXPECT_LT(max_abs_diff(a[c], xi[c].adjoint()), 0.0 + 1e-15);
}

TEST(Adjoint, InvolutionAndNormIdentity) {
  const Grid grid{2, 8};
  const Background bg(2, 8, 2, 0);
  GridField s = random_band_limited(grid, 2, 9, 1, true);
  s *= Complex(0.4 / s.sup_frobenius());
  const GridField h = hermitian_function(s, HermFn::Exp);
  const GridField hi = hermitian_function(-1.0 * s, HermFn::Exp);
  const EndForm xi = random_form(grid, 2, 0, 1, 8, 1);
  const EndForm xs = adjoint_form(xi, h, hi);
  EXPECT_LT(max_abs_diff(adjoint_form(xs, h, hi), xi), 1e-12);

  // i tr(xi* ^ xi) ^ omega^{n-1}/(n-1)! over omega^n/n! against the unitary-frame norm.
  EndForm prod = wedge(xs, xi);
  prod *= I;
  const GridField lhs = contract_top(trace(prod), bg, 1);
  const GridField hs = hermitian_function(0.5 * s, HermFn::Exp);
  const GridField hsi = hermitian_function(-0.5 * s, HermFn::Exp);
  double worst = 0.0;
  for (std::size_t p = 0; p < grid.points(); ++p) {
    double norm = 0.0;
    for (int b = 0; b < 2; ++b) norm += (hs.matrix(p) * xi[b].matrix(p) * hsi.matrix(p)).squaredNorm();
    worst = std::max(worst, std::abs(lhs(p, 0, 0) - norm));
  }
  EXPECT_LT(worst, 1e-11);
}

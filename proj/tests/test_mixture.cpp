#include <doctest.h>

#include <cmath>
#include <numbers>

#include "almc/gaussian_mixture.hpp"

#include "oracles.hpp"

using namespace almc;

namespace {

Matrix var1(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

GaussianMixture two_mode(double separation, double v = 1.0) {
  return GaussianMixture(
      {{0.5, {-separation}, var1(v)}, {0.5, {separation}, var1(v)}});
}

}  // namespace

TEST_SUITE("mixture") {

TEST_CASE("log density examples") {
  SUBCASE("standard normal at the mode") {
    const GaussianMixture g = GaussianMixture::standard(1);
    CHECK(g.log_density(Vec{0.0}) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
  }
  SUBCASE("symmetric mixture is even") {
    const GaussianMixture p = two_mode(3.0);
    CHECK(p.log_density(Vec{1.7}) ==
          doctest::Approx(p.log_density(Vec{-1.7})).epsilon(1e-15));
  }
  SUBCASE("matches the naive two-term summation oracle") {
    const GaussianMixture p(
        {{0.3, {-2.0}, var1(0.5)}, {0.7, {1.0}, var1(2.0)}});
    const double expected = oracles::naive_log_density(p, {0.4});
    CHECK(std::abs(p.log_density(Vec{0.4}) - expected) < 1e-12);
  }
  SUBCASE("well-separated components do not underflow the log-sum") {
    const GaussianMixture p = two_mode(40.0);
    CHECK(std::isfinite(p.log_density(Vec{-40.0})));
    CHECK(std::isfinite(p.log_density(Vec{0.0})));
  }
  SUBCASE("dimension mismatch") {
    const GaussianMixture g = GaussianMixture::standard(2);
    CHECK_THROWS_AS(g.log_density(Vec{0.0}), std::invalid_argument);
  }
}

TEST_CASE("score examples") {
  SUBCASE("standard gaussian score is -x") {
    const GaussianMixture g = GaussianMixture::standard(2);
    const Vec s = g.score(Vec{0.3, -1.4});
    CHECK(s[0] == doctest::Approx(-0.3).epsilon(1e-14));
    CHECK(s[1] == doctest::Approx(1.4).epsilon(1e-14));
  }
  SUBCASE("single component closed form") {
    Matrix cov(2, 2);
    cov(0, 0) = 2.0;
    cov(1, 1) = 0.5;
    const GaussianMixture g = GaussianMixture::single({1.0, -1.0}, cov);
    const Vec s = g.score(Vec{0.0, 0.0});
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(s[1] == doctest::Approx(-2.0).epsilon(1e-14));
  }
  SUBCASE("matches finite differences at a named point") {
    const GaussianMixture p = two_mode(3.0);
    const Vec s = p.score(Vec{0.1});
    const Vec fd = oracles::fd_score(p, {0.1});
    CHECK(s[0] == doctest::Approx(fd[0]).epsilon(1e-6));
  }
}

TEST_CASE("score matches finite differences on random mixtures") {
  SplitRng rng(314, 0);
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t dim = (trial % 2) + 1;
    const GaussianMixture p = oracles::random_mixture(rng, dim, 2 + trial % 2);
    for (int pt = 0; pt < 100; ++pt) {
      Vec x(dim);
      for (auto& v : x) v = 4.0 * rng.next_normal();
      const Vec s = p.score(x);
      const Vec fd = oracles::fd_score(p, x);
      const double denom = std::max(1.0, norm(fd));
      double err = 0.0;
      for (std::size_t i = 0; i < dim; ++i) err += (s[i] - fd[i]) * (s[i] - fd[i]);
      CHECK(std::sqrt(err) / denom < 1e-6);
      ++checked;
    }
  }
  CHECK(checked == 1000);
}

TEST_CASE("ou smoothing") {
  SUBCASE("standard gaussian is the fixed point") {
    const GaussianMixture g = GaussianMixture::standard(1);
    for (double t : {0.1, 1.0, 7.0}) {
      const GaussianMixture s = g.ou_smooth(SmoothTime(t));
      CHECK(s.component(0).mean[0] == doctest::Approx(0.0));
      CHECK(s.component(0).cov(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
  SUBCASE("closed form at t = ln 2") {
    const GaussianMixture p = GaussianMixture::single({2.0}, var1(0.25));
    const GaussianMixture s = p.ou_smooth(SmoothTime(std::log(2.0)));
    CHECK(s.component(0).mean[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.component(0).cov(0, 0) == doctest::Approx(0.8125).epsilon(1e-15));
  }
  SUBCASE("matches the convolution quadrature oracle") {
    const GaussianMixture p = GaussianMixture::single({2.0}, var1(0.25));
    const double t = std::log(2.0);
    const GaussianMixture s = p.ou_smooth(SmoothTime(t));
    double worst = 0.0;
    for (int i = 0; i < 40; ++i) {
      const double x = -4.0 + 8.0 * i / 39.0;
      const double conv = oracles::ou_density_by_convolution(p, t, x);
      const double closed = s.density(Vec{x});
      worst = std::max(worst, std::abs(conv - closed) / closed);
    }
    CHECK(worst < 1e-6);
  }
  SUBCASE("long times collapse to the standard gaussian") {
    const GaussianMixture p(
        {{0.4, {-2.0}, var1(0.5)}, {0.6, {4.0}, var1(1.7)}});
    const GaussianMixture s = p.ou_smooth(SmoothTime(20.0));
    for (const auto& c : s.components()) {
      CHECK(std::abs(c.mean[0]) < 1e-8);
      CHECK(std::abs(c.cov(0, 0) - 1.0) < 1e-8);
    }
  }
  SUBCASE("t = 0 is the identity") {
    const GaussianMixture p = two_mode(2.0);
    const GaussianMixture s = p.ou_smooth(SmoothTime(0.0));
    CHECK(s.component(0).mean[0] == p.component(0).mean[0]);
    CHECK(s.component(1).cov(0, 0) == p.component(1).cov(0, 0));
  }
}

TEST_CASE("ou semigroup composes exactly in parameters") {
  SplitRng rng(271, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t dim = (trial % 2) + 1;
    const GaussianMixture p = oracles::random_mixture(rng, dim, 2);
    const double s = 0.1 + rng.next_uniform();
    const double t = 0.1 + rng.next_uniform();
    const GaussianMixture once = p.ou_smooth(SmoothTime(s)).ou_smooth(SmoothTime(t));
    const GaussianMixture direct = p.ou_smooth(SmoothTime(s + t));
    for (std::size_t i = 0; i < p.component_count(); ++i) {
      CHECK(std::abs(once.component(i).weight - direct.component(i).weight) < 1e-12);
      for (std::size_t a = 0; a < dim; ++a) {
        CHECK(std::abs(once.component(i).mean[a] - direct.component(i).mean[a]) < 1e-12);
        for (std::size_t b = 0; b < dim; ++b)
          CHECK(std::abs(once.component(i).cov(a, b) - direct.component(i).cov(a, b)) <
                1e-12);
      }
    }
  }
}

TEST_CASE("smoothed density respects the kernel sup bound") {
  SplitRng rng(272, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t dim = (trial % 2) + 1;
    const GaussianMixture p = oracles::random_mixture(rng, dim, 2);
    for (double t : {0.1, 0.5, 1.0}) {
      const GaussianMixture s = p.ou_smooth(SmoothTime(t));
      const double bound =
          std::pow(2.0 * std::numbers::pi * (1.0 - std::exp(-2.0 * t)),
                   -0.5 * static_cast<double>(dim)) +
          1e-12;
      for (int pt = 0; pt < 200; ++pt) {
        Vec x(dim);
        for (auto& v : x) v = 8.0 * (rng.next_uniform() - 0.5);
        CHECK(s.density(x) <= bound);
      }
    }
  }
}

TEST_CASE("time derivative of the log density") {
  SUBCASE("stationary law has zero derivative") {
    const GaussianMixture g = GaussianMixture::standard(1);
    CHECK(g.dt_log_density(SmoothTime(0.3), Vec{0.7}) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("matches finite differences in t") {
    const GaussianMixture p = GaussianMixture::single({2.0}, var1(0.25));
    const double t = 0.5, h = 1e-5;
    const double analytic = p.dt_log_density(SmoothTime(t), Vec{0.0});
    const double fd = (p.ou_smooth(SmoothTime(t + h)).log_density(Vec{0.0}) -
                       p.ou_smooth(SmoothTime(t - h)).log_density(Vec{0.0})) /
                      (2.0 * h);
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
  }
  SUBCASE("magnitude blows up toward t = 0") {
    const GaussianMixture p = two_mode(3.0, 0.4);
    const double early = std::abs(p.dt_log_density(SmoothTime(0.05), Vec{0.9}));
    const double late = std::abs(p.dt_log_density(SmoothTime(1.0), Vec{0.9}));
    CHECK(early > late);
  }
  SUBCASE("t = 0 is rejected") {
    const GaussianMixture p = two_mode(1.0);
    CHECK_THROWS_AS(p.dt_log_density(SmoothTime(0.0), Vec{0.0}), std::domain_error);
  }
}

TEST_CASE("dt log density matches finite differences on random instances") {
  SplitRng rng(273, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t dim = (trial % 2) + 1;
    const GaussianMixture p = oracles::random_mixture(rng, dim, 2);
    const double t = 0.1 + 1.4 * rng.next_uniform();
    Vec x(dim);
    for (auto& v : x) v = 2.0 * rng.next_normal();
    const double h = 1e-5;
    const double analytic = p.dt_log_density(SmoothTime(t), x);
    const double fd = (p.ou_smooth(SmoothTime(t + h)).log_density(x) -
                       p.ou_smooth(SmoothTime(t - h)).log_density(x)) /
                      (2.0 * h);
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("posterior mean") {
  SUBCASE("standard gaussian contracts the observation") {
    const GaussianMixture g = GaussianMixture::standard(1);
    for (double t : {0.2, 1.0}) {
      const Vec m = g.posterior_mean(SmoothTime(t), Vec{1.3});
      CHECK(m[0] == doctest::Approx(std::exp(-t) * 1.3).epsilon(1e-12));
    }
  }
  SUBCASE("a near point mass dominates the posterior") {
    const GaussianMixture p = GaussianMixture::single({5.0}, var1(1e-4));
    for (double xt : {-2.0, 0.0, 3.0}) {
      const Vec m = p.posterior_mean(SmoothTime(1.0), Vec{xt});
      CHECK(std::abs(m[0] - 5.0) < 1e-2);
    }
  }
  SUBCASE("t = 0 is rejected") {
    const GaussianMixture p = two_mode(1.0);
    CHECK_THROWS_AS(p.posterior_mean(SmoothTime(0.0), Vec{0.0}), std::domain_error);
  }
}

TEST_CASE("tweedie rearrangement ties the smoothed score to the conditional mean") {
  // (1 - e^{-2t}) score(p_t, x) = e^{-t} E[x0 | x] - x, two independent
  // closed forms that must agree
  SplitRng rng(274, 0);
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t dim = (trial % 2) + 1;
    const GaussianMixture p = oracles::random_mixture(rng, dim, 2 + trial % 2);
    for (int pt = 0; pt < 100; ++pt) {
      const double t = 0.05 + 2.0 * rng.next_uniform();
      Vec x(dim);
      for (auto& v : x) v = 3.0 * rng.next_normal();
      const double a = std::exp(-t);
      const double b2 = 1.0 - a * a;
      const Vec sc = p.ou_smooth(SmoothTime(t)).score(x);
      const Vec pm = p.posterior_mean(SmoothTime(t), x);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double lhs = b2 * sc[i];
        const double rhs = a * pm[i] - x[i];
        num += (lhs - rhs) * (lhs - rhs);
        den += rhs * rhs;
      }
      CHECK(std::sqrt(num) <= 1e-8 * std::max(1.0, std::sqrt(den)));
      ++checked;
    }
  }
  CHECK(checked == 1000);
}

TEST_CASE("tilt") {
  SUBCASE("conjugate gaussian update") {
    const GaussianMixture g = GaussianMixture::standard(1);
    QuadraticPotential r(Matrix::identity(1), {1.0}, 1.0);
    const GaussianMixture post = tilt(g, r);
    CHECK(post.component(0).mean[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(post.component(0).cov(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("two-mode instance reproduces the flipped-posterior parameters") {
    // R(x) = (x + l)^2 / l^2 as noise_var = l^2/2 around y = -l
    const double ell = 3.0;
    const GaussianMixture p = two_mode(ell);
    QuadraticPotential r(Matrix::identity(1), {-ell}, ell * ell / 2.0);
    const GaussianMixture post = tilt(p, r);
    const double var = ell * ell / (ell * ell + 2.0);
    const double ratio = std::exp(-4.0 + 8.0 / (ell * ell + 2.0));
    CHECK(post.component(0).mean[0] == doctest::Approx(-ell).epsilon(1e-12));
    CHECK(post.component(1).mean[0] ==
          doctest::Approx(ell * (ell * ell - 2.0) / (ell * ell + 2.0)).epsilon(1e-12));
    CHECK(post.component(0).cov(0, 0) == doctest::Approx(var).epsilon(1e-12));
    CHECK(post.component(1).cov(0, 0) == doctest::Approx(var).epsilon(1e-12));
    CHECK(post.component(1).weight / post.component(0).weight ==
          doctest::Approx(ratio).epsilon(1e-12));
  }
  SUBCASE("density ratio against p e^{-R} is constant on a grid") {
    SplitRng rng(275, 0);
    const GaussianMixture p = oracles::random_mixture(rng, 1, 2);
    Matrix a(1, 1);
    a(0, 0) = 0.8;
    QuadraticPotential r(a, {0.6}, 1.3);
    const GaussianMixture post = tilt(p, r);
    double ref = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double x = -6.0 + 12.0 * i / 99.0;
      const double ratio =
          post.log_density(Vec{x}) - (p.log_density(Vec{x}) - r(Vec{x}));
      if (i == 0)
        ref = ratio;
      else
        CHECK(ratio == doctest::Approx(ref).epsilon(1e-10));
    }
  }
  SUBCASE("zero measurement leaves the prior untouched") {
    const GaussianMixture p = two_mode(2.0);
    const GaussianMixture post = tilt(p, QuadraticPotential::zero(1));
    CHECK(post.component(0).weight == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(post.component(0).mean[0] == doctest::Approx(-2.0).epsilon(1e-12));
  }
}

TEST_CASE("posterior tail flattens onto the gaussian tilt at the e^{-T} rate") {
  const GaussianMixture p = two_mode(2.0, 0.8);
  QuadraticPotential r(Matrix::identity(1), {1.0}, 2.0);
  const GaussianMixture limit = tilt(GaussianMixture::standard(1), r);
  const auto sup_gap = [&](double t) {
    const GaussianMixture cur = tilt(p.ou_smooth(SmoothTime(t)), r);
    double sup = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double x = -6.0 + 12.0 * i / 199.0;
      sup = std::max(sup,
                     std::abs(cur.log_density(Vec{x}) - limit.log_density(Vec{x})));
    }
    return sup;
  };
  for (double t : {2.0, 3.0, 4.0}) {
    CHECK(sup_gap(t + 1.0) <= 0.5 * sup_gap(t));
  }
}

TEST_CASE("smoothing does not raise the score slope") {
  const GaussianMixture p = two_mode(2.5, 0.5);
  const auto max_slope = [&](double t) {
    const GaussianMixture s = t == 0.0 ? p : p.ou_smooth(SmoothTime(t));
    double worst = 0.0;
    const double h = 1e-4;
    for (int i = 0; i < 800; ++i) {
      const double x = -6.0 + 12.0 * i / 799.0;
      const double slope =
          (s.score(Vec{x + h})[0] - s.score(Vec{x - h})[0]) / (2.0 * h);
      worst = std::max(worst, std::abs(slope));
    }
    return worst;
  };
  const double base = max_slope(0.0);
  CHECK(max_slope(0.25) <= base * (1.0 + 1e-3));
  CHECK(max_slope(1.0) <= base * (1.0 + 1e-3));
}

TEST_CASE("invariant validation") {
  CHECK_THROWS_AS(GaussianMixture({{0.5, {0.0}, var1(1.0)}}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({{-0.2, {0.0}, var1(1.0)},
                                   {1.2, {1.0}, var1(1.0)}}),
                  std::invalid_argument);
  Matrix asym(2, 2);
  asym(0, 0) = 1.0; asym(0, 1) = 0.5;
  asym(1, 0) = -0.5; asym(1, 1) = 1.0;
  CHECK_THROWS_AS(GaussianMixture::single({0.0, 0.0}, asym), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture::single({0.0}, var1(1e-13)), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({{0.5, {0.0}, var1(1.0)},
                                   {0.5, {0.0, 0.0}, Matrix::identity(2)}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(SmoothTime(-0.1), std::invalid_argument);
}

TEST_CASE("regularity proxies are clamped to at least one") {
  const RegularityConstants rc = regularity_proxy(GaussianMixture::standard(2));
  CHECK(rc.m_subgaussian >= 1.0);
  CHECK(rc.score_lipschitz >= 1.0);
  CHECK(rc.dim == 2);
  const RegularityConstants rc2 = regularity_proxy(two_mode(3.0, 0.25));
  CHECK(rc2.m_subgaussian == doctest::Approx(3.25));
  CHECK(rc2.score_lipschitz == doctest::Approx(4.0));
}

TEST_CASE("sampling matches the mixture moments") {
  const GaussianMixture p(
      {{0.3, {-2.0}, var1(0.5)}, {0.7, {1.0}, var1(2.0)}});
  SplitRng rng(555, 0);
  const int n = 200000;
  double mean = 0.0, second = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec x = p.sample(rng);
    mean += x[0];
    second += x[0] * x[0];
  }
  mean /= n;
  second /= n;
  const double expect_mean = p.mean()[0];
  const double expect_var = p.covariance()(0, 0);
  CHECK(mean == doctest::Approx(expect_mean).epsilon(0.02));
  CHECK(second - mean * mean == doctest::Approx(expect_var).epsilon(0.03));
}

}  // TEST_SUITE

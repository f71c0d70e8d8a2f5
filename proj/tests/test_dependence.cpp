#include <doctest.h>

#include <numeric>
#include <random>

#include "mci/dependence.hpp"
#include "mci/indicator.hpp"
#include "oracles.hpp"

using namespace mci;

namespace {

struct Sample {
  Matrix X;
  std::vector<int> y;
  std::vector<int> z;
  Matrix Y;
  Matrix Z;
};

Sample random_sample(Index n, std::uint64_t seed, int K = 3, int domains = 2) {
  Sample s;
  s.X = oracle::random_matrix(2, n, seed);
  s.y = oracle::random_labels(n, K, seed + 100);
  s.z = oracle::random_labels(n, domains, seed + 200);
  s.Y = oracle::indicator(s.y, K);
  s.Z = oracle::indicator(s.z, domains);
  // make X depend on Z so the statistics are not trivially small
  for (Index j = 0; j < n; ++j) s.X(0, j) += 1.5 * s.z[j];
  return s;
}

GramMatrix fitted_gram(const Matrix& X) { return gram(X, KernelConfig::fitted_or_unit(X)); }

}  // namespace

TEST_CASE("nocco equals the dense-inverse oracle") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Sample s = random_sample(40, seed);
    for (double eps : {1e-4, 1e-2}) {
      const auto r = nocco(fitted_gram(s.X), fitted_gram(s.Z), eps);
      const double ref = oracle::nocco(oracle::gram_fitted(s.X), oracle::gram_fitted(s.Z), eps);
      CHECK(r.statistic == doctest::Approx(ref).epsilon(1e-8));
      CHECK(r.statistic >= 0.0);
      CHECK(r.kind == DependenceKind::Nocco);
      CHECK(r.n == 40);
      CHECK_FALSE(r.permutation_pvalue.has_value());
    }
  }
}

TEST_CASE("cond equals the dense-inverse oracle") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Sample s = random_sample(36, seed);
    const double eps = 1e-3;
    const auto r = cond_statistic(CondVariables{s.X, s.Y, s.Z}, eps);
    CHECK(r.statistic == doctest::Approx(oracle::cond_raw(s.X, s.Y, s.Z, eps)).epsilon(1e-8));
    CHECK(r.kind == DependenceKind::Cond);
  }
}

TEST_CASE("constant Y reduces cond to nocco") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Sample s = random_sample(50, seed);
    const Matrix Y = Matrix::Ones(1, 50);
    const double c = cond_statistic(CondVariables{s.X, Y, s.Z}, 1e-4).statistic;
    const double v = nocco(fitted_gram(s.X), fitted_gram(s.Z), 1e-4).statistic;
    CHECK(std::abs(c - v) / v <= 1e-8);
  }
}

TEST_CASE("shared extended bandwidth is one Gaussian on the concatenated rows") {
  const Sample s = random_sample(40, 12);
  Matrix XY(s.X.rows() + s.Y.rows(), 40);
  XY << s.X, s.Y;
  Matrix ZY(s.Z.rows() + s.Y.rows(), 40);
  ZY << s.Z, s.Y;
  const Matrix S = Matrix::Identity(40, 40) - oracle::normalized(oracle::gram_fitted(s.Y), 1e-3);
  const double expected = (oracle::normalized(oracle::gram_fitted(ZY), 1e-3) * S *
                           oracle::normalized(oracle::gram_fitted(XY), 1e-3) * S)
                              .trace();
  const double shared = cond_statistic({s.X, s.Y, s.Z}, 1e-3, ExtendedBandwidth::Shared).statistic;
  CHECK(shared == doctest::Approx(expected).epsilon(1e-8));
  const double per_block = cond_statistic({s.X, s.Y, s.Z}, 1e-3).statistic;
  CHECK(per_block != doctest::Approx(shared).epsilon(1e-6));
}

TEST_CASE("nocco with a constant domain variable is zero") {
  const Sample s = random_sample(30, 3);
  const auto r = nocco(fitted_gram(s.X), fitted_gram(Matrix::Ones(2, 30)), 1e-3);
  CHECK(r.statistic == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("cond with a constant domain variable matches the oracle and vanishes as eps shrinks") {
  // K_Zt collapses to K_Y, leaving Tr(R_Y S R_Xt S) with S = I - R_Y; it is
  // not exactly zero under regularization but decays with eps.
  const Sample s = random_sample(40, 8);
  const Matrix Z = Matrix::Ones(2, 40);
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double c = cond_statistic(CondVariables{s.X, s.Y, Z}, eps).statistic;
    CHECK(c == doctest::Approx(oracle::cond_raw(s.X, s.Y, Z, eps)).epsilon(1e-6));
    CHECK(c >= -1e-12);
    CHECK(c < previous);
    previous = c;
  }
  CHECK(previous < 1e-3);
}

TEST_CASE("statistics are invariant to a joint permutation of the samples") {
  const Sample s = random_sample(45, 5);
  std::vector<Index> perm(45);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Matrix Xp = s.X(Eigen::all, perm);
  const Matrix Yp = s.Y(Eigen::all, perm);
  const Matrix Zp = s.Z(Eigen::all, perm);
  std::vector<int> yp, zp;
  for (Index i : perm) {
    yp.push_back(s.y[i]);
    zp.push_back(s.z[i]);
  }
  const double eps = 1e-3;
  CHECK(nocco(fitted_gram(Xp), fitted_gram(Zp), eps).statistic ==
        doctest::Approx(nocco(fitted_gram(s.X), fitted_gram(s.Z), eps).statistic).epsilon(1e-9));
  CHECK(cond_statistic({Xp, Yp, Zp}, eps).statistic ==
        doctest::Approx(cond_statistic({s.X, s.Y, s.Z}, eps).statistic).epsilon(1e-9));
  CHECK(per_class_nocco(fitted_gram(Xp), fitted_gram(Zp), yp, zp, eps).statistic ==
        doctest::Approx(per_class_nocco(fitted_gram(s.X), fitted_gram(s.Z), s.y, s.z, eps).statistic)
            .epsilon(1e-9));
}

TEST_CASE("statistics are invariant to rescaling X under the fitted bandwidth") {
  const Sample s = random_sample(40, 6);
  const double eps = 1e-3;
  for (double c : {1e-3, 7.0, 1e3}) {
    const Matrix Xc = c * s.X;
    CHECK(nocco(fitted_gram(Xc), fitted_gram(s.Z), eps).statistic ==
          doctest::Approx(nocco(fitted_gram(s.X), fitted_gram(s.Z), eps).statistic).epsilon(1e-9));
    CHECK(cond_statistic({Xc, s.Y, s.Z}, eps).statistic ==
          doctest::Approx(cond_statistic({s.X, s.Y, s.Z}, eps).statistic).epsilon(1e-9));
  }
}

TEST_CASE("statistics reject mismatched sizes and bad epsilon") {
  const Sample s = random_sample(20, 1);
  const Sample t = random_sample(21, 1);
  CHECK_THROWS_AS(nocco(fitted_gram(s.X), fitted_gram(t.Z), 1e-3), InputError);
  CHECK_THROWS_AS(nocco(fitted_gram(s.X), fitted_gram(s.Z), 0.0), ConfigError);
  CHECK_THROWS_AS(cond_statistic({s.X, s.Y, t.Z}, 1e-3), InputError);
}

TEST_CASE("permutation p-values are deterministic and bounded") {
  const Sample s = random_sample(60, 2);
  const GramMatrix KX = fitted_gram(s.X);
  const GramMatrix KZ = fitted_gram(s.Z);
  const PermutationOptions opts{99, 7};
  const auto a = nocco_test(KX, KZ, 1e-3, opts);
  const auto b = nocco_test(KX, KZ, 1e-3, opts);
  REQUIRE(a.permutation_pvalue.has_value());
  CHECK(*a.permutation_pvalue == *b.permutation_pvalue);
  CHECK(*a.permutation_pvalue >= 1.0 / 100.0);
  CHECK(*a.permutation_pvalue <= 1.0);
  CHECK(a.permutations == 99);
  // X shifted by 1.5 with the domain: every shuffle scores lower
  CHECK(*a.permutation_pvalue == doctest::Approx(1.0 / 100.0));
  CHECK_THROWS_AS(nocco_test(KX, KZ, 1e-3, PermutationOptions{0, 0}), ConfigError);
}

TEST_CASE("within-class permutation test separates dependent from conditionally independent data") {
  // Domain shifts X only through the class: X = class mean + noise.
  const Index n = 120;
  const auto y = oracle::random_labels(n, 2, 31);
  std::vector<int> z(n);
  std::mt19937_64 rng(32);
  Matrix X = oracle::random_matrix(1, n, 33);
  for (Index j = 0; j < n; ++j) {
    z[j] = std::bernoulli_distribution(y[j] == 0 ? 0.7 : 0.3)(rng) ? 1 : 0;
    X(0, j) += 3.0 * y[j];
  }
  const Matrix Y = one_hot(y, 2);
  const Matrix Z = one_hot(z, 2);
  const PermutationOptions opts{200, 1};
  const CondGrams ci = build_cond_grams({X, Y, Z});
  const auto independent = cond_test(ci.KXt, ci.KZt, ci.KY, y, 1e-3, opts);
  CHECK(*independent.permutation_pvalue > 0.01);

  Matrix Xd = X;
  for (Index j = 0; j < n; ++j) Xd(0, j) += 2.0 * z[j];
  const CondGrams dep = build_cond_grams({Xd, Y, Z});
  const auto dependent = cond_test(dep.KXt, dep.KZt, dep.KY, y, 1e-3, opts);
  CHECK(*dependent.permutation_pvalue < 0.01);
  CHECK(dependent.statistic == doctest::Approx(cond(dep.KXt, dep.KZt, dep.KY, 1e-3).statistic));
}

TEST_CASE("per-class nocco averages the restricted statistics with class weights") {
  const Sample s = random_sample(60, 4, 3, 2);
  const double eps = 1e-3;
  const GramMatrix KX = fitted_gram(s.X);
  const GramMatrix KZ = fitted_gram(s.Z);
  const auto r = per_class_nocco(KX, KZ, s.y, s.z, eps);
  double expected = 0.0;
  double weight_sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<Index> idx;
    for (Index i = 0; i < 60; ++i) {
      if (s.y[i] == c) idx.push_back(i);
    }
    const Matrix kx = KX.entries()(idx, idx);
    const Matrix kz = KZ.entries()(idx, idx);
    const double w = static_cast<double>(idx.size()) / 60.0;
    expected += w * oracle::nocco(kx, kz, eps);
    weight_sum += w;
  }
  CHECK(weight_sum == doctest::Approx(1.0));
  CHECK(r.statistic == doctest::Approx(expected).epsilon(1e-8));
  CHECK(r.per_class.size() == 3);
  CHECK(r.skipped_classes == 0);
}

TEST_CASE("per-class nocco skips classes seen in a single domain") {
  // class 0 only in domain 0, class 1 in both domains
  const std::vector<int> y{0, 0, 0, 1, 1, 1, 1};
  const std::vector<int> z{0, 0, 0, 0, 1, 0, 1};
  const Matrix X = oracle::random_matrix(2, 7, 3);
  const GramMatrix KX = fitted_gram(X);
  const GramMatrix KZ = fitted_gram(one_hot(z, 2));
  const auto r = per_class_nocco(KX, KZ, y, z, 1e-3);
  CHECK(r.skipped_classes == 1);
  REQUIRE(r.per_class.size() == 1);
  CHECK(r.per_class[0].label == 1);
  CHECK(r.per_class[0].weight == 1.0);

  const std::vector<int> all_zero{0, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(per_class_nocco(KX, KZ, y, all_zero, 1e-3), DegenerateDataError);
}

TEST_CASE("convergence probe flags schedules outside the consistency conditions") {
  const CiScenario scenario = [](Index n, std::uint64_t seed) {
    const auto y = oracle::random_labels(n, 2, seed);
    const auto z = oracle::random_labels(n, 2, seed + 1);
    Matrix X = oracle::random_matrix(1, n, seed + 2);
    for (Index j = 0; j < n; ++j) X(0, j) += 3.0 * y[j];
    return CondVariables{X, one_hot(y, 2), one_hot(z, 2)};
  };
  const std::vector<Index> sizes{20, 40};
  const auto good = convergence_probe(scenario, sizes, default_epsilon_schedule, 3, 0);
  CHECK(good.warnings.empty());
  REQUIRE(good.points.size() == 2);
  CHECK(good.points[0].statistics.size() == 3);
  CHECK(good.points[1].epsilon == doctest::Approx(std::pow(40.0, -0.25)));

  const auto fixed = convergence_probe(scenario, sizes, [](Index) { return 1e-2; }, 1, 0);
  CHECK_FALSE(fixed.warnings.empty());
  const auto too_fast = convergence_probe(scenario, sizes, [](Index n) { return 1.0 / n; }, 1, 0);
  CHECK_FALSE(too_fast.warnings.empty());
}

TEST_CASE("median of odd and even lists") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), InputError);
}

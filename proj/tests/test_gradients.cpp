#include <doctest.h>

#include "mci/gradients.hpp"
#include "mci/indicator.hpp"
#include "mci/model.hpp"
#include "oracles.hpp"

using namespace mci;

namespace {

struct Problem {
  Matrix X;  // d' x n features
  Matrix Y;
  Matrix Z;
};

Problem make_problem(std::uint64_t seed, Index n = 30, Index d = 4) {
  Problem p;
  p.X = oracle::random_matrix(d, n, seed);
  const auto y = oracle::random_labels(n, 3, seed + 1);
  const auto z = oracle::random_labels(n, 2, seed + 2);
  for (Index j = 0; j < n; ++j) p.X(0, j) += z[j] + 0.5 * y[j];
  p.Y = one_hot(y, 3);
  p.Z = one_hot(z, 2);
  return p;
}

}  // namespace

TEST_CASE("COND feature gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Problem p = make_problem(seed);
    for (double eps : {1e-3, 1e-1}) {
      const CondObjective objective(p.X, p.Y, p.Z, eps);
      Matrix grad;
      const double value = objective.value_and_gradient(p.X, grad);
      CHECK(value == doctest::Approx(objective.value(p.X)).epsilon(1e-9));
      const auto report = finite_diff_check([&](const Matrix& X) { return objective.value(X); }, grad,
                                            p.X, 50, 1e-5, seed);
      CHECK(report.max_rel_error < 1e-4);
      CHECK(report.probes == 50);
    }
  }
}

TEST_CASE("COND objective value agrees with the oracle at the reference features") {
  const Problem p = make_problem(3);
  const CondObjective objective(p.X, p.Y, p.Z, 1e-3);
  CHECK(objective.value(p.X) == doctest::Approx(oracle::cond_raw(p.X, p.Y, p.Z, 1e-3)).epsilon(1e-8));
}

TEST_CASE("NOCCO feature gradient matches central differences") {
  const Problem p = make_problem(7);
  const CondObjective objective = CondObjective::nocco(p.X, p.Z, 1e-2);
  Matrix grad;
  objective.value_and_gradient(p.X, grad);
  const auto report =
      finite_diff_check([&](const Matrix& X) { return objective.value(X); }, grad, p.X, 50, 1e-5, 1);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("NOCCO objective with a single domain is zero with zero gradient") {
  const Problem p = make_problem(2);
  const CondObjective objective = CondObjective::nocco(p.X, Matrix::Ones(1, 30), 1e-3);
  Matrix grad;
  CHECK(objective.value_and_gradient(p.X, grad) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(grad.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("grad_cond_wrt_features freezes the bandwidth fitted at the input") {
  const Problem p = make_problem(4);
  Matrix expected;
  CondObjective(p.X, p.Y, p.Z, 1e-3).value_and_gradient(p.X, expected);
  CHECK(grad_cond_wrt_features(p.X, p.Y, p.Z, 1e-3) == expected);
  CHECK_THROWS_AS(grad_cond_wrt_features(p.X, p.Y.leftCols(10), p.Z, 1e-3), InputError);
}

TEST_CASE("cross-entropy and entropy logit gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix L = oracle::random_matrix(4, 30, seed, 2.0);
    const Matrix labels = one_hot(oracle::random_labels(30, 4, seed + 9), 4);
    const Matrix P = softmax_columns(L);
    const auto ce = finite_diff_check(
        [&](const Matrix& M) { return loss_ce(softmax_columns(M), labels); }, grad_ce_logits(P, labels), L,
        50, 1e-5, seed);
    CHECK(ce.max_rel_error < 1e-4);
    const auto ent = finite_diff_check([&](const Matrix& M) { return loss_entropy(softmax_columns(M)); },
                                       grad_entropy_logits(P), L, 50, 1e-5, seed);
    CHECK(ent.max_rel_error < 1e-4);
  }
}

TEST_CASE("finite-difference checker validates its arguments and flags a wrong gradient") {
  const Matrix X = oracle::random_matrix(2, 5, 1);
  const ScalarObjective f = [](const Matrix& M) { return M.squaredNorm(); };
  CHECK_THROWS_AS(finite_diff_check(f, 2.0 * X, X, 0, 1e-5, 0), ConfigError);
  CHECK_THROWS_AS(finite_diff_check(f, 2.0 * X, X, 5, 0.0, 0), ConfigError);
  CHECK_THROWS_AS(finite_diff_check(f, Matrix::Zero(3, 5), X, 5, 1e-5, 0), InputError);
  CHECK(finite_diff_check(f, 2.0 * X, X, 100, 1e-5, 0).probes == 10);
  CHECK(finite_diff_check(f, 2.0 * X, X, 10, 1e-5, 0).max_rel_error < 1e-8);
  CHECK(finite_diff_check(f, 3.0 * X, X, 10, 1e-5, 0).max_rel_error > 0.1);
}

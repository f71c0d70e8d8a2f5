#include <doctest.h>

#include "mci/discrepancy.hpp"
#include "oracles.hpp"

using namespace mci;

TEST_CASE("mmd equals the three-block oracle") {
  const Matrix A = oracle::random_matrix(2, 30, 1);
  const Matrix B = oracle::random_matrix(2, 25, 2, 1.5);
  for (double s2 : {0.5, 2.0, 10.0}) {
    CHECK(mmd(A, B, KernelConfig::fixed(s2)) == doctest::Approx(oracle::mmd(A, B, s2)).epsilon(1e-12));
  }
}

TEST_CASE("mmd of a sample with itself is zero and the statistic is symmetric") {
  const Matrix A = oracle::random_matrix(3, 20, 4);
  const Matrix B = oracle::random_matrix(3, 20, 5);
  CHECK(mmd(A, A, KernelConfig::fixed(1.0)) == doctest::Approx(0.0).scale(1.0));
  CHECK(mmd(A, B, KernelConfig::fixed(1.0)) == doctest::Approx(mmd(B, A, KernelConfig::fixed(1.0))));
  CHECK(mmd(A, B, KernelConfig::fixed(1.0)) >= 0.0);
}

TEST_CASE("mmd grows with the mean shift") {
  const Matrix A = oracle::random_matrix(2, 100, 6);
  const Matrix B0 = oracle::random_matrix(2, 100, 7);
  double previous = -1.0;
  for (double shift : {0.0, 1.0, 2.0, 4.0}) {
    const Matrix B = B0.array() + shift;
    const double v = mmd_pooled_bandwidth(A, B);
    CHECK(v > previous);
    previous = v;
  }
}

TEST_CASE("mmd rejects empty or mismatched samples") {
  CHECK_THROWS_AS(mmd(Matrix(2, 0), oracle::random_matrix(2, 3, 1), KernelConfig::fixed(1.0)), InputError);
  CHECK_THROWS_AS(mmd(oracle::random_matrix(2, 3, 1), oracle::random_matrix(3, 3, 1), KernelConfig::fixed(1.0)),
                  InputError);
}

TEST_CASE("a-distance is near its maximum for separated domains and near zero for identical ones") {
  const Matrix S = oracle::random_matrix(2, 200, 11);
  const Matrix far = oracle::random_matrix(2, 200, 12).array() + 10.0;
  const AdistanceReport separated = a_distance(S, far, 3);
  CHECK(separated.classifier_test_error == 0.0);
  CHECK(separated.d_A == 2.0);

  const Matrix same = oracle::random_matrix(2, 200, 13);
  const AdistanceReport mixed = a_distance(S, same, 3);
  CHECK(mixed.classifier_test_error > 0.35);
  CHECK(mixed.d_A < 0.6);
  CHECK(mixed.d_A == doctest::Approx(2.0 * (1.0 - 2.0 * mixed.classifier_test_error)));
}

TEST_CASE("a-distance is deterministic per split seed") {
  const Matrix S = oracle::random_matrix(2, 60, 1);
  const Matrix T = oracle::random_matrix(2, 60, 2).array() + 0.5;
  CHECK(a_distance(S, T, 9).d_A == a_distance(S, T, 9).d_A);
  CHECK_THROWS_AS(a_distance(S.leftCols(3), T, 9), InputError);
}

TEST_CASE("class-conditional a-distance skips small classes and weights by size") {
  const Matrix S = oracle::random_matrix(2, 40, 21);
  const Matrix T = oracle::random_matrix(2, 40, 22);
  std::vector<int> ys(40, 0), yt(40, 0);
  for (int i = 20; i < 40; ++i) {
    ys[i] = 1;
    yt[i] = 1;
  }
  ys[0] = 2;  // class 2 has one source sample and no target sample
  const AdistanceReport r = a_distance(S, ys, T, yt, 5);
  CHECK(r.skipped_classes == 1);
  REQUIRE(r.per_class.size() == 2);
  REQUIRE(r.d_A_C.has_value());
  const double expected =
      (r.per_class[0].n * r.per_class[0].d_A + r.per_class[1].n * r.per_class[1].d_A) /
      static_cast<double>(r.per_class[0].n + r.per_class[1].n);
  CHECK(*r.d_A_C == doctest::Approx(expected));
}

TEST_CASE("domain discriminator separates shifted clouds") {
  Matrix X(1, 6);
  X << -3, -2, -1, 1, 2, 3;
  const std::vector<int> t{0, 0, 0, 1, 1, 1};
  const DomainDiscriminator d = train_discriminator(X, t);
  Vector left(1), right(1);
  left << -2.5;
  right << 2.5;
  CHECK(d.predict(left) < 0.5);
  CHECK(d.predict(right) > 0.5);
}

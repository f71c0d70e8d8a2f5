#include "mci/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace mci {

namespace {

void require_finite(const Matrix& M, const char* stage) {
  if (!M.allFinite()) {
    throw NumericalError(std::string("COND gradient: non-finite values at stage '") + stage + "'");
  }
}

Matrix symmetrized(const Matrix& M) { return 0.5 * (M + M.transpose()); }

}  // namespace

CondObjective::CondObjective(const Matrix& X_reference, const Matrix& Y, const Matrix& Z,
                             double epsilon)
    : CondObjective(Y, Z, KernelConfig::fitted(X_reference), epsilon, false) {}

CondObjective CondObjective::nocco(const Matrix& X_reference, const Matrix& Z, double epsilon) {
  return CondObjective(Matrix(0, Z.cols()), Z, KernelConfig::fitted(X_reference), epsilon, true);
}

CondObjective::CondObjective(const Matrix& Y, const Matrix& Z, const KernelConfig& feature_kernel,
                             double epsilon, bool unconditional)
    : n_(Z.cols()), epsilon_(epsilon), feature_kernel_(feature_kernel) {
  feature_kernel_.validate();
  if (!(epsilon > 0.0)) throw ConfigError("CondObjective: epsilon must be positive");
  if (!unconditional && Y.cols() != n_) {
    throw InputError("CondObjective: Y and Z must have the same number of columns");
  }
  const Matrix KZ = gram(Z, KernelConfig::fitted_or_unit(Z)).entries();
  if (unconditional) {
    KY_ = Matrix::Ones(n_, n_);
    S_ = Matrix::Identity(n_, n_);
    SRZtS_ = normalize(center(KZ), epsilon).entries();
    return;
  }
  KY_ = gram(Y, KernelConfig::fitted_or_unit(Y)).entries();
  const Matrix RY = normalize(center(KY_), epsilon).entries();
  S_ = Matrix::Identity(n_, n_) - RY;
  const Matrix RZt = normalize(center(Matrix(KZ.cwiseProduct(KY_))), epsilon).entries();
  SRZtS_ = symmetrized(S_ * RZt * S_);
}

CondObjective CondObjective::with_feature_kernel(const KernelConfig& feature_kernel) const {
  feature_kernel.validate();
  CondObjective copy = *this;
  copy.feature_kernel_ = feature_kernel;
  return copy;
}

double CondObjective::value(const Matrix& X) const {
  if (X.cols() != n_) throw InputError("CondObjective: feature column count mismatch");
  const Matrix KXt = gram(X, feature_kernel_).entries().cwiseProduct(KY_);
  const NormalizedGram RXt = normalize(center(KXt), epsilon_);
  return SRZtS_.cwiseProduct(RXt.entries()).sum();
}

double CondObjective::value_and_gradient(const Matrix& X, Matrix& grad) const {
  if (X.cols() != n_) throw InputError("CondObjective: feature column count mismatch");
  const double n_eps = static_cast<double>(n_) * epsilon_;

  const Matrix KX = gram(X, feature_kernel_).entries();
  require_finite(KX, "feature kernel");
  const Matrix G = center(Matrix(KX.cwiseProduct(KY_)));
  Matrix A = G;
  A.diagonal().array() += n_eps;
  const Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("COND gradient: G + n*eps*I is not positive definite");
  }
  const Matrix A_inv = symmetrized(llt.solve(Matrix::Identity(n_, n_)));
  require_finite(A_inv, "regularized inverse");
  Matrix RXt = -n_eps * A_inv;
  RXt.diagonal().array() += 1.0;
  const double L = SRZtS_.cwiseProduct(RXt).sum();

  const Matrix dG = symmetrized(n_eps * (A_inv * SRZtS_ * A_inv));
  require_finite(dG, "dL/dG");
  const Matrix dK = center(dG);
  const Matrix W = dK.cwiseProduct(KY_).cwiseProduct(KX);
  require_finite(W, "dL/dK");

  const Vector row_sums = W.rowwise().sum();
  grad = (-4.0 / feature_kernel_.bandwidth_sq) * (X * row_sums.asDiagonal() - X * W);
  require_finite(grad, "dL/dX");
  return L;
}

Matrix grad_cond_wrt_features(const Matrix& Xre, const Matrix& Y, const Matrix& Z,
                              double epsilon) {
  if (Xre.cols() != Y.cols() || Xre.cols() != Z.cols()) {
    throw InputError("grad_cond_wrt_features: sample count mismatch");
  }
  const CondObjective objective(Xre, Y, Z, epsilon);
  Matrix grad;
  objective.value_and_gradient(Xre, grad);
  return grad;
}

GradCheckReport finite_diff_check(const ScalarObjective& objective, const Matrix& analytic_grad,
                                  const Matrix& X, int probes, double step, std::uint64_t seed) {
  if (probes <= 0) throw ConfigError("finite_diff_check: no probes");
  if (!(step > 0.0)) throw ConfigError("finite_diff_check: step must be positive");
  if (analytic_grad.rows() != X.rows() || analytic_grad.cols() != X.cols()) {
    throw InputError("finite_diff_check: gradient shape does not match X");
  }
  if (!std::isfinite(objective(X))) throw NumericalError("finite_diff_check: objective non-finite at X");

  const Index total = X.size();
  std::vector<Index> coords(total);
  std::iota(coords.begin(), coords.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  if (static_cast<Index>(probes) < total) coords.resize(probes);

  double max_diff = 0.0;
  double max_analytic = 0.0;
  Matrix Xp = X;
  for (Index c : coords) {
    const double orig = Xp(c);
    Xp(c) = orig + step;
    const double up = objective(Xp);
    Xp(c) = orig - step;
    const double down = objective(Xp);
    Xp(c) = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("finite_diff_check: objective non-finite at a perturbed point");
    }
    const double numeric = (up - down) / (2.0 * step);
    max_diff = std::max(max_diff, std::abs(analytic_grad(c) - numeric));
    max_analytic = std::max(max_analytic, std::abs(analytic_grad(c)));
  }
  GradCheckReport report;
  report.max_rel_error = max_diff / (max_analytic + 1e-12);
  report.probes = static_cast<int>(coords.size());
  report.step = step;
  return report;
}

}  // namespace mci

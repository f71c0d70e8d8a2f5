#pragma once

// Closed-form gradients of the COND / NOCCO trace objectives with respect to
// the transformed features, and a central finite-difference checker.
//
// For L = Tr(R_Zt S R_Xt S) with R_Xt = I - n*eps*A^-1, A = G_Xt + n*eps*I:
//   dL/dG_Xt = n*eps * A^-1 (S R_Zt S) A^-1
//   dL/dK_Xt = H (dL/dG_Xt) H
//   dL/dK_X  = (dL/dK_Xt) o K_Y
//   dL/dx_i  = -(4 / sigma^2) sum_j W_ij (x_i - x_j),  W = (dL/dK_X) o K_X
// Kernel bandwidths are held fixed (stop-gradient) inside one evaluation.

#include <cstdint>
#include <functional>

#include "mci/kernel.hpp"

namespace mci {

/// The COND objective as a function of the features X (d' x n) with Y, Z and
/// every bandwidth frozen. With `unconditional` set, Y is dropped and the
/// objective becomes NOCCO Tr(R_Z R_X).
class CondObjective {
 public:
  /// Fits the feature bandwidth on `X_reference` (MeanSqDist) and the
  /// indicator bandwidths on Y and Z.
  CondObjective(const Matrix& X_reference, const Matrix& Y, const Matrix& Z, double epsilon);

  static CondObjective nocco(const Matrix& X_reference, const Matrix& Z, double epsilon);

  CondObjective(const Matrix& Y, const Matrix& Z, const KernelConfig& feature_kernel,
                double epsilon, bool unconditional);

  /// Same Y, Z terms with a different (frozen) feature bandwidth.
  CondObjective with_feature_kernel(const KernelConfig& feature_kernel) const;

  double value(const Matrix& X) const;

  /// Returns L and writes dL/dX into `grad`.
  double value_and_gradient(const Matrix& X, Matrix& grad) const;

  const KernelConfig& feature_kernel() const { return feature_kernel_; }
  double epsilon() const { return epsilon_; }
  Index n() const { return n_; }

 private:
  Index n_;
  double epsilon_;
  KernelConfig feature_kernel_;
  Matrix KY_;       // all ones when unconditional
  Matrix S_;        // I - R_Y (identity when unconditional)
  Matrix SRZtS_;    // S R_Zt S
};

/// d/dX of COND(X, Y, Z) with every bandwidth fitted at X and then frozen.
Matrix grad_cond_wrt_features(const Matrix& Xre, const Matrix& Y, const Matrix& Z,
                              double epsilon);

struct GradCheckReport {
  double max_rel_error = 0.0;  // |g_analytic - g_numeric|_inf / (|g_analytic|_inf + 1e-12)
  int probes = 0;
  double step = 0.0;
};

using ScalarObjective = std::function<double(const Matrix&)>;

/// Central differences on `probes` coordinates drawn with `seed`; the norms
/// in max_rel_error run over the probed coordinates.
GradCheckReport finite_diff_check(const ScalarObjective& objective, const Matrix& analytic_grad,
                                  const Matrix& X, int probes, double step, std::uint64_t seed);

}  // namespace mci

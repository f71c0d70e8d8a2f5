#pragma once

// Gaussian kernels, Gram matrices, centering and the regularized
// normalization R = G (G + n*eps*I)^-1 shared by every dependence statistic.
//
// Feature matrices are d x n with one sample per column.

#include <Eigen/Dense>

#include <span>
#include <utility>

#include "mci/errors.hpp"

namespace mci {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class BandwidthRule { MeanSqDist, Fixed };

/// Bandwidth of k(x, y) = exp(-|x - y|^2 / bandwidth_sq).
struct KernelConfig {
  double bandwidth_sq = 1.0;
  BandwidthRule rule = BandwidthRule::Fixed;

  static KernelConfig fixed(double bandwidth_sq);
  /// MeanSqDist rule fitted to the columns of `X`. Throws DegenerateDataError
  /// when every column is identical.
  static KernelConfig fitted(const Matrix& X);
  /// Like fitted(), but constant data (e.g. a single domain or class
  /// indicator) falls back to bandwidth 1. The kernel is identically 1 there
  /// whatever the bandwidth.
  static KernelConfig fitted_or_unit(const Matrix& X);

  void validate() const;
};

double gaussian_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                       const KernelConfig& cfg);

/// (1/n^2) * sum_{i,j} |x_i - x_j|^2, self-pairs included.
double mean_sq_dist_bandwidth(const Matrix& X);

/// Symmetric n x n kernel matrix. Construction checks exact symmetry.
class GramMatrix {
 public:
  explicit GramMatrix(Matrix entries);

  const Matrix& entries() const { return entries_; }
  Index n() const { return entries_.rows(); }

 private:
  Matrix entries_;
};

/// R = G (G + n*eps*I)^-1 for a centered Gram G; eigenvalues lie in [0, 1).
class NormalizedGram {
 public:
  NormalizedGram(Matrix entries, double epsilon);

  const Matrix& entries() const { return entries_; }
  double epsilon() const { return epsilon_; }
  Index n() const { return entries_.rows(); }

 private:
  Matrix entries_;
  double epsilon_;
};

GramMatrix gram(const Matrix& X, const KernelConfig& cfg);

/// Gram matrix of an arbitrary symmetric kernel callable k(x_i, x_j).
template <typename Kernel>
GramMatrix gram_with(const Matrix& X, Kernel&& kernel) {
  const Index n = X.cols();
  Matrix K(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i <= j; ++i) {
      const double v = kernel(X.col(i), X.col(j));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return GramMatrix(std::move(K));
}

/// Elementwise (Schur) product: the Gram of the product kernel k_a * k_b.
GramMatrix product_gram(const GramMatrix& a, const GramMatrix& b);

/// H K H with H = I - 11^T/n. Row and column sums of the result vanish.
Matrix center(const GramMatrix& K);
Matrix center(const Matrix& K);

/// Regularized normalization of a symmetric PSD matrix via a Cholesky solve
/// of (G + n*eps*I).
NormalizedGram normalize(const Matrix& G, double epsilon);

/// normalize(center(K), epsilon).
NormalizedGram normalized_gram(const GramMatrix& K, double epsilon);

/// P M P^T for the permutation sending sample i to position i: result(i, j) = M(perm[i], perm[j]).
Matrix permute_symmetric(const Matrix& M, std::span<const Index> perm);

/// Selects the rows and columns listed in `idx`.
Matrix restrict_symmetric(const Matrix& M, std::span<const Index> idx);

}  // namespace mci

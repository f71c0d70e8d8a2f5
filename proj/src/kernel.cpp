#include "mci/kernel.hpp"

#include <cmath>
#include <string>

namespace mci {

namespace {

void require_finite(const Matrix& M, const char* what) {
  if (!M.allFinite()) throw NumericalError(std::string(what) + ": non-finite entries");
}

double sq_dist(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  double acc = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    const double diff = x[k] - y[k];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

KernelConfig KernelConfig::fixed(double bandwidth_sq) {
  KernelConfig cfg{bandwidth_sq, BandwidthRule::Fixed};
  cfg.validate();
  return cfg;
}

KernelConfig KernelConfig::fitted(const Matrix& X) {
  return KernelConfig{mean_sq_dist_bandwidth(X), BandwidthRule::MeanSqDist};
}

KernelConfig KernelConfig::fitted_or_unit(const Matrix& X) {
  try {
    return fitted(X);
  } catch (const DegenerateDataError&) {
    return KernelConfig{1.0, BandwidthRule::Fixed};
  }
}

void KernelConfig::validate() const {
  if (!(bandwidth_sq > 0.0) || !std::isfinite(bandwidth_sq)) {
    throw ConfigError("kernel bandwidth must be positive and finite, got " +
                      std::to_string(bandwidth_sq));
  }
}

double gaussian_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                       const KernelConfig& cfg) {
  cfg.validate();
  if (x.size() != y.size()) {
    throw InputError("gaussian_kernel: dimension mismatch (" + std::to_string(x.size()) +
                     " vs " + std::to_string(y.size()) + ")");
  }
  return std::exp(-sq_dist(x, y) / cfg.bandwidth_sq);
}

double mean_sq_dist_bandwidth(const Matrix& X) {
  const Index n = X.cols();
  if (n < 2) throw InputError("mean_sq_dist_bandwidth: need at least 2 samples");
  require_finite(X, "mean_sq_dist_bandwidth");
  // sum_{i,j} |x_i - x_j|^2 = 2n * sum_i |x_i - mean|^2
  const Vector mean = X.rowwise().mean();
  double scatter = 0.0;
  for (Index i = 0; i < n; ++i) scatter += sq_dist(X.col(i), mean);
  const double bw = 2.0 * scatter / static_cast<double>(n);
  if (!(bw > 0.0)) {
    throw DegenerateDataError("all samples are identical; mean squared distance bandwidth is 0");
  }
  return bw;
}

GramMatrix::GramMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) throw InputError("Gram matrix must be square");
  for (Index j = 0; j < entries_.cols(); ++j) {
    for (Index i = 0; i < j; ++i) {
      if (entries_(i, j) != entries_(j, i)) throw InputError("Gram matrix must be symmetric");
    }
  }
}

NormalizedGram::NormalizedGram(Matrix entries, double epsilon)
    : entries_(std::move(entries)), epsilon_(epsilon) {}

GramMatrix gram(const Matrix& X, const KernelConfig& cfg) {
  cfg.validate();
  if (X.cols() < 1) throw InputError("gram: need at least one sample");
  require_finite(X, "gram");
  const double inv_bw = 1.0 / cfg.bandwidth_sq;
  return gram_with(X, [inv_bw](const auto& x, const auto& y) {
    return std::exp(-sq_dist(x, y) * inv_bw);
  });
}

GramMatrix product_gram(const GramMatrix& a, const GramMatrix& b) {
  if (a.n() != b.n()) {
    throw InputError("product_gram: size mismatch (" + std::to_string(a.n()) + " vs " +
                     std::to_string(b.n()) + ")");
  }
  return GramMatrix(a.entries().cwiseProduct(b.entries()));
}

Matrix center(const GramMatrix& K) { return center(K.entries()); }

Matrix center(const Matrix& K) {
  const Index n = K.rows();
  if (n != K.cols() || n < 1) throw InputError("center: expected a non-empty square matrix");
  const Vector row_mean = K.rowwise().mean();
  const Vector col_mean = K.colwise().mean().transpose();
  const double grand = row_mean.mean();
  Matrix G(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i <= j; ++i) {
      const double v = K(i, j) - row_mean[i] - col_mean[j] + grand;
      G(i, j) = v;
      G(j, i) = v;
    }
  }
  return G;
}

NormalizedGram normalize(const Matrix& G, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("normalize: epsilon must be positive, got " + std::to_string(epsilon));
  }
  const Index n = G.rows();
  if (n != G.cols()) throw InputError("normalize: expected a square matrix");
  require_finite(G, "normalize");
  Matrix A = G;
  A.diagonal().array() += static_cast<double>(n) * epsilon;
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("normalize: G + n*eps*I is not positive definite");
  }
  // G and (G + n*eps*I)^-1 commute, so R = A^-1 G.
  Matrix R = llt.solve(G);
  require_finite(R, "normalize");
  Matrix sym = 0.5 * (R + R.transpose());
  return NormalizedGram(std::move(sym), epsilon);
}

NormalizedGram normalized_gram(const GramMatrix& K, double epsilon) {
  // R = H R H holds exactly for centered G. Re-centering removes rounding in
  // the null direction of G, which the solve amplifies by 1 / (n eps).
  const NormalizedGram R = normalize(center(K), epsilon);
  return NormalizedGram(center(R.entries()), epsilon);
}

Matrix permute_symmetric(const Matrix& M, std::span<const Index> perm) {
  const Index n = M.rows();
  if (static_cast<Index>(perm.size()) != n) throw InputError("permute_symmetric: size mismatch");
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) out(i, j) = M(perm[i], perm[j]);
  }
  return out;
}

Matrix restrict_symmetric(const Matrix& M, std::span<const Index> idx) {
  const Index m = static_cast<Index>(idx.size());
  Matrix out(m, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < m; ++i) out(i, j) = M(idx[i], idx[j]);
  }
  return out;
}

}  // namespace mci

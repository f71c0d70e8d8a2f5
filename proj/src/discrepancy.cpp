#include "mci/discrepancy.hpp"

#include <cmath>
#include <map>
#include <random>
#include <string>

namespace mci {

namespace {

double kernel_sum(const Matrix& A, const Matrix& B, double inv_bw) {
  double acc = 0.0;
  for (Index j = 0; j < B.cols(); ++j) {
    for (Index i = 0; i < A.cols(); ++i) {
      acc += std::exp(-(A.col(i) - B.col(j)).squaredNorm() * inv_bw);
    }
  }
  return acc;
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

struct Split {
  std::vector<Index> train;
  std::vector<Index> test;
};

// Shuffles 0..m-1 and puts the first floor(m/2) into train.
Split half_split(Index m, std::mt19937_64& rng) {
  std::vector<Index> idx(m);
  for (Index i = 0; i < m; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  Split s;
  const Index half = m / 2;
  s.train.assign(idx.begin(), idx.begin() + half);
  s.test.assign(idx.begin() + half, idx.end());
  return s;
}

Matrix gather(const Matrix& X, const std::vector<Index>& cols) {
  Matrix out(X.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = X.col(cols[k]);
  return out;
}

double discriminator_error(const Matrix& XS, const Matrix& XT, std::uint64_t split_seed) {
  std::mt19937_64 rng(split_seed);
  const Split s = half_split(XS.cols(), rng);
  const Split t = half_split(XT.cols(), rng);

  const Index n_train = static_cast<Index>(s.train.size() + t.train.size());
  Matrix train(XS.rows(), n_train);
  std::vector<int> train_y;
  Index col = 0;
  for (Index i : s.train) { train.col(col++) = XS.col(i); train_y.push_back(0); }
  for (Index i : t.train) { train.col(col++) = XT.col(i); train_y.push_back(1); }

  const DomainDiscriminator model = train_discriminator(train, train_y);
  Index wrong = 0;
  for (Index i : s.test) wrong += model.predict(XS.col(i)) > 0.5 ? 1 : 0;
  for (Index i : t.test) wrong += model.predict(XT.col(i)) > 0.5 ? 0 : 1;
  return static_cast<double>(wrong) / static_cast<double>(s.test.size() + t.test.size());
}

}  // namespace

double mmd(const Matrix& XA, const Matrix& XB, const KernelConfig& cfg) {
  cfg.validate();
  if (XA.cols() == 0 || XB.cols() == 0) throw InputError("mmd: both samples must be non-empty");
  if (XA.rows() != XB.rows()) throw InputError("mmd: dimension mismatch");
  const double inv_bw = 1.0 / cfg.bandwidth_sq;
  const double na = static_cast<double>(XA.cols());
  const double nb = static_cast<double>(XB.cols());
  const double value = kernel_sum(XA, XA, inv_bw) / (na * na) +
                       kernel_sum(XB, XB, inv_bw) / (nb * nb) -
                       2.0 * kernel_sum(XA, XB, inv_bw) / (na * nb);
  // The V-statistic is a squared RKHS norm; clip rounding below zero.
  return std::max(0.0, value);
}

double mmd_pooled_bandwidth(const Matrix& XA, const Matrix& XB) {
  Matrix pooled(XA.rows(), XA.cols() + XB.cols());
  pooled << XA, XB;
  return mmd(XA, XB, KernelConfig::fitted(pooled));
}

double DomainDiscriminator::predict(const Eigen::Ref<const Vector>& x) const {
  const Vector z = (x - mean).cwiseQuotient(scale);
  return sigmoid(weights.dot(z) + bias);
}

DomainDiscriminator train_discriminator(const Matrix& X, std::span<const int> is_target,
                                        int steps) {
  const Index d = X.rows();
  const Index m = X.cols();
  if (m == 0 || static_cast<Index>(is_target.size()) != m) {
    throw InputError("train_discriminator: label count must match the sample count");
  }
  DomainDiscriminator model;
  model.mean = X.rowwise().mean();
  model.scale = ((X.colwise() - model.mean).array().square().rowwise().mean()).sqrt().matrix();
  for (Index k = 0; k < d; ++k) {
    if (!(model.scale[k] > 0.0)) model.scale[k] = 1.0;
  }
  const Matrix Zs = (X.colwise() - model.mean).array().colwise() / model.scale.array();

  // 1/L for the mean logistic loss is at least 4 / mean(|z|^2 + 1).
  const double step = 4.0 / (1.0 + Zs.colwise().squaredNorm().mean());
  model.weights = Vector::Zero(d);
  model.bias = 0.0;
  for (int it = 0; it < steps; ++it) {
    Vector residual(m);
    for (Index j = 0; j < m; ++j) {
      residual[j] = sigmoid(model.weights.dot(Zs.col(j)) + model.bias) - is_target[j];
    }
    model.weights -= step * (Zs * residual) / static_cast<double>(m);
    model.bias -= step * residual.mean();
  }
  return model;
}

AdistanceReport a_distance(const Matrix& XS, const Matrix& XT, std::uint64_t split_seed) {
  if (XS.rows() != XT.rows()) throw InputError("a_distance: dimension mismatch");
  if (XS.cols() < 4 || XT.cols() < 4) {
    throw InputError("a_distance: need at least 4 samples per domain");
  }
  AdistanceReport report;
  report.classifier_test_error = discriminator_error(XS, XT, split_seed);
  report.d_A = 2.0 * (1.0 - 2.0 * report.classifier_test_error);
  return report;
}

AdistanceReport a_distance(const Matrix& XS, std::span<const int> source_labels, const Matrix& XT,
                           std::span<const int> target_labels, std::uint64_t split_seed) {
  if (static_cast<Index>(source_labels.size()) != XS.cols() ||
      static_cast<Index>(target_labels.size()) != XT.cols()) {
    throw InputError("a_distance: label count must match the sample count");
  }
  AdistanceReport report = a_distance(XS, XT, split_seed);

  std::map<int, std::pair<std::vector<Index>, std::vector<Index>>> by_class;
  for (Index i = 0; i < XS.cols(); ++i) by_class[source_labels[i]].first.push_back(i);
  for (Index i = 0; i < XT.cols(); ++i) by_class[target_labels[i]].second.push_back(i);

  Index included = 0;
  for (const auto& [label, members] : by_class) {
    const auto& [src, tgt] = members;
    if (src.size() + tgt.size() < 4 || src.size() < 2 || tgt.size() < 2) {
      ++report.skipped_classes;
      continue;
    }
    ClassAdistance c;
    c.label = label;
    c.n = static_cast<Index>(src.size() + tgt.size());
    c.classifier_test_error = discriminator_error(gather(XS, src), gather(XT, tgt), split_seed);
    c.d_A = 2.0 * (1.0 - 2.0 * c.classifier_test_error);
    report.per_class.push_back(c);
    included += c.n;
  }
  if (!report.per_class.empty()) {
    double acc = 0.0;
    for (const auto& c : report.per_class) {
      acc += static_cast<double>(c.n) / static_cast<double>(included) * c.d_A;
    }
    report.d_A_C = acc;
  }
  return report;
}

}  // namespace mci

#pragma once

// Feature transform g (Linear -> ReLU -> Linear), softmax classifier C, and
// the loss terms of the adaptation objective
//   L = L_CE + beta1 * L_COND + beta2 * L_Ent
// with every loss a sum over samples.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "mci/gradients.hpp"
#include "mci/kernel.hpp"

namespace mci {

struct ModelShape {
  Index input_dim = 0;
  Index hidden_dim = 512;
  Index feature_dim = 512;
  Index num_classes = 0;

  bool operator==(const ModelShape&) const = default;
};

/// y = W x + b; W is (out x in).
struct DenseLayer {
  Matrix weights;
  Vector bias;

  Matrix apply(const Matrix& X) const;
};

struct ModelParams {
  DenseLayer g1;  // input_dim -> hidden_dim
  DenseLayer g2;  // hidden_dim -> feature_dim
  DenseLayer c;   // feature_dim -> num_classes

  ModelShape shape() const;
  bool all_finite() const;
  /// Throws InputError when layer shapes do not chain.
  void validate() const;

  static ModelParams zeros(const ModelShape& shape);
  /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static ModelParams uniform_init(const ModelShape& shape, std::uint64_t seed);

  template <typename F>
  void for_each_layer(F&& f) {
    f(g1);
    f(g2);
    f(c);
  }
  template <typename F>
  void for_each_layer(F&& f) const {
    f(g1);
    f(g2);
    f(c);
  }

  bool operator==(const ModelParams& other) const;
};

/// Bit-exact comparison of every weight and bias.
bool identical(const ModelParams& a, const ModelParams& b);

struct ForwardCache {
  Matrix pre_activation;  // g1(X)
  Matrix hidden;          // relu(pre_activation)
  Matrix features;        // g(X)
  Matrix logits;          // C's linear output
  Matrix probs;           // softmax(logits), column-wise
};

Matrix forward_g(const ModelParams& params, const Matrix& X);
/// Column-wise softmax probabilities (K x n).
Matrix forward_c(const ModelParams& params, const Matrix& Xre);
ForwardCache forward(const ModelParams& params, const Matrix& X);

/// Max-shifted column softmax.
Matrix softmax_columns(const Matrix& logits);

inline constexpr double kLogClamp = 1e-12;

/// sum_j sum_i -y_ij log(max(p_ij, 1e-12)). Throws InputError unless every
/// column of `labels` is one-hot.
double loss_ce(const Matrix& probs, const Matrix& labels);
/// sum_j sum_i -p_ij log(max(p_ij, 1e-12)), natural log.
double loss_entropy(const Matrix& probs);

/// dL_CE/dlogits for one-hot labels: probs - labels.
Matrix grad_ce_logits(const Matrix& probs, const Matrix& labels);
/// dL_Ent/dlogits: -p_k (log p_k + H_j) per column j.
Matrix grad_entropy_logits(const Matrix& probs);

/// Parameter gradients given dL/dlogits and an extra dL/dfeatures term
/// (pass an empty matrix when there is none).
ModelParams backward(const ModelParams& params, const Matrix& X, const ForwardCache& cache,
                     const Matrix& d_logits, const Matrix& d_features);

struct LossBreakdown {
  double ce = 0.0;
  double cond = 0.0;
  double ent = 0.0;
  double total = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;

  /// total is assembled here and nowhere else.
  static LossBreakdown make(double ce, double cond, double ent, double beta1, double beta2);
};

/// All samples of an adaptation problem stacked column-wise:
/// every source (in order) first, the target last.
struct StackedBatch {
  Matrix X;          // d x n
  Matrix Ys;         // K x n_source, one-hot
  Matrix Z;          // (N + 1) x n domain indicators
  Index n_source = 0;

  Index n() const { return X.cols(); }
  Index n_target() const { return X.cols() - n_source; }
  int num_domains() const { return static_cast<int>(Z.rows()); }
};

struct LossSettings {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double epsilon = 1e-5;
  /// Evaluate L_COND even when beta1 = 0 (reported, never differentiated).
  bool evaluate_disabled_terms = true;
};

struct LossEvaluation {
  LossBreakdown losses;
  std::optional<ModelParams> grads;
  ForwardCache cache;
};

/// Keeps the label- and domain-dependent COND terms between calls; they are
/// rebuilt whenever Y, Z or epsilon change. Results match an uncached call
/// bit-exactly.
struct CondTermCache {
  Matrix Y;
  Matrix Z;
  double epsilon = 0.0;
  std::optional<CondObjective> objective;
};

/// Evaluates the objective on the stacked batch. `pseudo_labels` (K x n_t)
/// feed the COND term's class indicators on the target. When every sample
/// sits in one domain, L_COND is 0 (there is no domain variation to remove).
LossEvaluation evaluate_losses(const ModelParams& params, const StackedBatch& batch,
                               const std::optional<Matrix>& pseudo_labels,
                               const LossSettings& settings, bool with_gradients,
                               CondTermCache* cache = nullptr);

/// Loss values only. Throws PreconditionError when pseudo-labels are absent.
LossBreakdown loss_total(const ModelParams& params, const StackedBatch& batch,
                         const std::optional<Matrix>& pseudo_labels, const LossSettings& settings);

/// Text model file: a header line, the shape, then each matrix with its own
/// "rows cols" line followed by rows of shortest round-trip decimals.
void save_model(std::ostream& out, const ModelParams& params);
ModelParams load_model(std::istream& in);
void save_model(const std::string& path, const ModelParams& params);
ModelParams load_model(const std::string& path);

}  // namespace mci

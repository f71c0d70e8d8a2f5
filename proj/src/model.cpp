#include "mci/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "mci/gradients.hpp"
#include "mci/indicator.hpp"
#include "mci/numeric_text.hpp"

namespace mci {

namespace {

void require_rows(const Matrix& X, Index rows, const char* what) {
  if (X.rows() != rows) {
    throw InputError(std::string(what) + ": expected " + std::to_string(rows) + " rows, got " +
                     std::to_string(X.rows()));
  }
}

DenseLayer zero_layer(Index out, Index in) {
  return DenseLayer{Matrix::Zero(out, in), Vector::Zero(out)};
}

DenseLayer uniform_layer(Index out, Index in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseLayer layer = zero_layer(out, in);
  for (Index j = 0; j < in; ++j) {
    for (Index i = 0; i < out; ++i) layer.weights(i, j) = dist(rng);
  }
  for (Index i = 0; i < out; ++i) layer.bias[i] = dist(rng);
  return layer;
}

bool bits_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

bool bits_equal(const Vector& a, const Vector& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

// True when every column of Z is identical.
bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool single_domain(const Matrix& Z) {
  for (Index j = 1; j < Z.cols(); ++j) {
    if (Z.col(j) != Z.col(0)) return false;
  }
  return true;
}

void write_matrix(std::ostream& out, const std::string& name, const Matrix& M) {
  out << "matrix " << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(M(i, j));
    }
    out << '\n';
  }
}

Matrix read_matrix(std::istream& in, const std::string& name, Index rows, Index cols) {
  std::string tag, got_name;
  Index r = 0, c = 0;
  if (!(in >> tag >> got_name >> r >> c) || tag != "matrix" || got_name != name) {
    throw ParseError("model file: expected 'matrix " + name + "'");
  }
  if (r != rows || c != cols) {
    throw ParseError("model file: " + name + " has shape " + std::to_string(r) + "x" +
                     std::to_string(c) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  Matrix M(rows, cols);
  std::string token;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (!(in >> token)) throw ParseError("model file: truncated matrix " + name);
      const auto v = parse_double(token);
      if (!v) throw ParseError("model file: bad number '" + token + "' in " + name);
      M(i, j) = *v;
    }
  }
  return M;
}

constexpr const char* kModelHeader = "mci-model 1";

}  // namespace

Matrix DenseLayer::apply(const Matrix& X) const {
  require_rows(X, weights.cols(), "dense layer input");
  Matrix out = weights * X;
  out.colwise() += bias;
  return out;
}

ModelShape ModelParams::shape() const {
  return ModelShape{g1.weights.cols(), g1.weights.rows(), g2.weights.rows(), c.weights.rows()};
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_layer([&](const DenseLayer& l) { ok = ok && l.weights.allFinite() && l.bias.allFinite(); });
  return ok;
}

void ModelParams::validate() const {
  const bool chained = g2.weights.cols() == g1.weights.rows() &&
                       c.weights.cols() == g2.weights.rows() &&
                       g1.bias.size() == g1.weights.rows() &&
                       g2.bias.size() == g2.weights.rows() && c.bias.size() == c.weights.rows();
  if (!chained) throw InputError("model parameters: layer shapes do not chain");
  if (!all_finite()) throw NumericalError("model parameters: non-finite values");
}

ModelParams ModelParams::zeros(const ModelShape& s) {
  return ModelParams{zero_layer(s.hidden_dim, s.input_dim), zero_layer(s.feature_dim, s.hidden_dim),
                     zero_layer(s.num_classes, s.feature_dim)};
}

ModelParams ModelParams::uniform_init(const ModelShape& s, std::uint64_t seed) {
  if (s.input_dim < 1 || s.hidden_dim < 1 || s.feature_dim < 1 || s.num_classes < 1) {
    throw ConfigError("model shape: every dimension must be positive");
  }
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.g1 = uniform_layer(s.hidden_dim, s.input_dim, rng);
  p.g2 = uniform_layer(s.feature_dim, s.hidden_dim, rng);
  p.c = uniform_layer(s.num_classes, s.feature_dim, rng);
  return p;
}

bool ModelParams::operator==(const ModelParams& other) const { return identical(*this, other); }

bool identical(const ModelParams& a, const ModelParams& b) {
  auto same = [](const DenseLayer& x, const DenseLayer& y) {
    return bits_equal(x.weights, y.weights) && bits_equal(x.bias, y.bias);
  };
  return same(a.g1, b.g1) && same(a.g2, b.g2) && same(a.c, b.c);
}

Matrix forward_g(const ModelParams& params, const Matrix& X) {
  return params.g2.apply(params.g1.apply(X).cwiseMax(0.0));
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix P(logits.rows(), logits.cols());
  for (Index j = 0; j < logits.cols(); ++j) {
    const double shift = logits.col(j).maxCoeff();
    P.col(j) = (logits.col(j).array() - shift).exp().matrix();
    P.col(j) /= P.col(j).sum();
  }
  return P;
}

Matrix forward_c(const ModelParams& params, const Matrix& Xre) {
  return softmax_columns(params.c.apply(Xre));
}

ForwardCache forward(const ModelParams& params, const Matrix& X) {
  ForwardCache cache;
  cache.pre_activation = params.g1.apply(X);
  cache.hidden = cache.pre_activation.cwiseMax(0.0);
  cache.features = params.g2.apply(cache.hidden);
  cache.logits = params.c.apply(cache.features);
  cache.probs = softmax_columns(cache.logits);
  return cache;
}

double loss_ce(const Matrix& probs, const Matrix& labels) {
  if (probs.rows() != labels.rows() || probs.cols() != labels.cols()) {
    throw InputError("loss_ce: probabilities and labels differ in shape");
  }
  if (!is_one_hot(labels)) throw InputError("loss_ce: label columns must be one-hot");
  double acc = 0.0;
  for (Index j = 0; j < probs.cols(); ++j) {
    for (Index i = 0; i < probs.rows(); ++i) {
      if (labels(i, j) != 0.0) acc -= labels(i, j) * std::log(std::max(probs(i, j), kLogClamp));
    }
  }
  return acc;
}

double loss_entropy(const Matrix& probs) {
  double acc = 0.0;
  for (Index j = 0; j < probs.cols(); ++j) {
    for (Index i = 0; i < probs.rows(); ++i) {
      const double p = probs(i, j);
      acc -= p * std::log(std::max(p, kLogClamp));
    }
  }
  return acc;
}

Matrix grad_ce_logits(const Matrix& probs, const Matrix& labels) { return probs - labels; }

Matrix grad_entropy_logits(const Matrix& probs) {
  Matrix out(probs.rows(), probs.cols());
  for (Index j = 0; j < probs.cols(); ++j) {
    double h = 0.0;
    for (Index i = 0; i < probs.rows(); ++i) {
      const double p = probs(i, j);
      h -= p * std::log(std::max(p, kLogClamp));
    }
    for (Index i = 0; i < probs.rows(); ++i) {
      const double p = probs(i, j);
      out(i, j) = -p * (std::log(std::max(p, kLogClamp)) + h);
    }
  }
  return out;
}

ModelParams backward(const ModelParams& params, const Matrix& X, const ForwardCache& cache,
                     const Matrix& d_logits, const Matrix& d_features) {
  ModelParams g;
  g.c.weights = d_logits * cache.features.transpose();
  g.c.bias = d_logits.rowwise().sum();
  Matrix d_feat = params.c.weights.transpose() * d_logits;
  if (d_features.size() > 0) d_feat += d_features;
  g.g2.weights = d_feat * cache.hidden.transpose();
  g.g2.bias = d_feat.rowwise().sum();
  Matrix d_hidden = params.g2.weights.transpose() * d_feat;
  d_hidden = d_hidden.cwiseProduct((cache.pre_activation.array() > 0.0).cast<double>().matrix());
  g.g1.weights = d_hidden * X.transpose();
  g.g1.bias = d_hidden.rowwise().sum();
  return g;
}

LossBreakdown LossBreakdown::make(double ce, double cond, double ent, double beta1, double beta2) {
  LossBreakdown b;
  b.ce = ce;
  b.cond = cond;
  b.ent = ent;
  b.beta1 = beta1;
  b.beta2 = beta2;
  b.total = ce + beta1 * cond + beta2 * ent;
  return b;
}

LossEvaluation evaluate_losses(const ModelParams& params, const StackedBatch& batch,
                               const std::optional<Matrix>& pseudo_labels,
                               const LossSettings& settings, bool with_gradients,
                               CondTermCache* cache) {
  const Index n = batch.n();
  const Index ns = batch.n_source;
  const Index nt = batch.n_target();
  const Index K = params.c.weights.rows();
  if (batch.Ys.cols() != ns || batch.Ys.rows() != K) {
    throw InputError("evaluate_losses: source labels must be K x n_source");
  }
  if (batch.Z.cols() != n) throw InputError("evaluate_losses: Z must have one column per sample");
  if (settings.beta1 < 0.0 || settings.beta2 < 0.0) {
    throw ConfigError("evaluate_losses: beta1 and beta2 must be non-negative");
  }
  const bool need_cond = settings.beta1 > 0.0 || settings.evaluate_disabled_terms;
  if (need_cond && nt > 0 && !pseudo_labels) {
    throw PreconditionError("pseudo-labels are not initialized; call init_pseudo_labels first");
  }
  if (pseudo_labels && (pseudo_labels->rows() != K || pseudo_labels->cols() != nt)) {
    throw InputError("evaluate_losses: pseudo-labels must be K x n_target");
  }

  LossEvaluation eval;
  eval.cache = forward(params, batch.X);
  const Matrix& P = eval.cache.probs;

  const double ce = loss_ce(P.leftCols(ns), batch.Ys);
  const double ent = loss_entropy(P.rightCols(nt));

  double cond_value = 0.0;
  Matrix d_features;
  if (need_cond && !single_domain(batch.Z)) {
    Matrix Y(K, n);
    Y.leftCols(ns) = batch.Ys;
    if (nt > 0) Y.rightCols(nt) = *pseudo_labels;
    const KernelConfig feature_kernel = KernelConfig::fitted(eval.cache.features);
    std::optional<CondObjective> fresh;
    const bool reuse = cache != nullptr && cache->objective && cache->epsilon == settings.epsilon &&
                       same_matrix(cache->Y, Y) && same_matrix(cache->Z, batch.Z);
    if (!reuse) {
      fresh.emplace(Y, batch.Z, feature_kernel, settings.epsilon, false);
      if (cache != nullptr) {
        cache->Y = Y;
        cache->Z = batch.Z;
        cache->epsilon = settings.epsilon;
        cache->objective = *fresh;
      }
    }
    const CondObjective objective =
        reuse ? cache->objective->with_feature_kernel(feature_kernel) : std::move(*fresh);
    if (with_gradients && settings.beta1 > 0.0) {
      Matrix g;
      cond_value = objective.value_and_gradient(eval.cache.features, g);
      d_features = settings.beta1 * g;
      if (!d_features.allFinite()) throw NumericalError("gradient of L_COND is non-finite");
    } else {
      cond_value = objective.value(eval.cache.features);
    }
  }
  eval.losses = LossBreakdown::make(ce, cond_value, ent, settings.beta1, settings.beta2);

  if (with_gradients) {
    Matrix d_logits = Matrix::Zero(K, n);
    d_logits.leftCols(ns) = grad_ce_logits(P.leftCols(ns), batch.Ys);
    if (!d_logits.allFinite()) throw NumericalError("gradient of L_CE is non-finite");
    if (settings.beta2 > 0.0 && nt > 0) {
      d_logits.rightCols(nt) = settings.beta2 * grad_entropy_logits(P.rightCols(nt));
      if (!d_logits.allFinite()) throw NumericalError("gradient of L_Ent is non-finite");
    }
    eval.grads = backward(params, batch.X, eval.cache, d_logits, d_features);
    if (!eval.grads->all_finite()) throw NumericalError("parameter gradients are non-finite");
  }
  return eval;
}

LossBreakdown loss_total(const ModelParams& params, const StackedBatch& batch,
                         const std::optional<Matrix>& pseudo_labels, const LossSettings& settings) {
  if (!pseudo_labels && batch.n_target() > 0) {
    throw PreconditionError("pseudo-labels are not initialized; call init_pseudo_labels first");
  }
  return evaluate_losses(params, batch, pseudo_labels, settings, false).losses;
}

void save_model(std::ostream& out, const ModelParams& params) {
  params.validate();
  const ModelShape s = params.shape();
  out << kModelHeader << '\n';
  out << "shape " << s.input_dim << ' ' << s.hidden_dim << ' ' << s.feature_dim << ' '
      << s.num_classes << '\n';
  write_matrix(out, "g1.weights", params.g1.weights);
  write_matrix(out, "g1.bias", params.g1.bias);
  write_matrix(out, "g2.weights", params.g2.weights);
  write_matrix(out, "g2.bias", params.g2.bias);
  write_matrix(out, "c.weights", params.c.weights);
  write_matrix(out, "c.bias", params.c.bias);
}

ModelParams load_model(std::istream& in) {
  std::string header;
  std::getline(in, header);
  if (trim(header) != kModelHeader) throw ParseError("model file: missing '" + std::string(kModelHeader) + "' header");
  std::string tag;
  ModelShape s;
  if (!(in >> tag >> s.input_dim >> s.hidden_dim >> s.feature_dim >> s.num_classes) || tag != "shape") {
    throw ParseError("model file: bad shape line");
  }
  ModelParams p;
  p.g1.weights = read_matrix(in, "g1.weights", s.hidden_dim, s.input_dim);
  p.g1.bias = read_matrix(in, "g1.bias", s.hidden_dim, 1);
  p.g2.weights = read_matrix(in, "g2.weights", s.feature_dim, s.hidden_dim);
  p.g2.bias = read_matrix(in, "g2.bias", s.feature_dim, 1);
  p.c.weights = read_matrix(in, "c.weights", s.num_classes, s.feature_dim);
  p.c.bias = read_matrix(in, "c.bias", s.num_classes, 1);
  p.validate();
  return p;
}

void save_model(const std::string& path, const ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open model file for writing: " + path);
  save_model(out, params);
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file: " + path);
  return load_model(in);
}

}  // namespace mci

#include "mci/trainer.hpp"

#include <cmath>

#include "mci/indicator.hpp"

namespace mci {

namespace {

void adam_step(Matrix& w, const Matrix& g, Matrix& m, Matrix& v, double lr, double bc1, double bc2,
               const AdamSettings& s) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.eps);
}

void adam_step(Vector& w, const Vector& g, Vector& m, Vector& v, double lr, double bc1, double bc2,
               const AdamSettings& s) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.eps);
}

LossSettings ce_only() {
  LossSettings s;
  s.evaluate_disabled_terms = false;
  return s;
}

}  // namespace

std::string to_string(PseudoLabelMode mode) {
  return mode == PseudoLabelMode::Hard ? "hard" : "soft";
}

void TrainConfig::validate() const {
  if (!(beta1 >= 0.0) || !(beta2 >= 0.0)) throw ConfigError("beta1 and beta2 must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (pretrain_epochs < 0 || adapt_epochs < 0) throw ConfigError("epoch counts must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (hidden_dim < 1 || feature_dim < 1) throw ConfigError("layer widths must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 &&
        adam.eps > 0.0)) {
    throw ConfigError("Adam settings out of range");
  }
}

LossSettings TrainConfig::loss_settings() const {
  LossSettings s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  s.evaluate_disabled_terms = evaluate_disabled_terms;
  return s;
}

AdamState AdamState::zeros_like(const ModelParams& params) {
  AdamState st;
  st.m = ModelParams::zeros(params.shape());
  st.v = ModelParams::zeros(params.shape());
  return st;
}

void adam_update(ModelParams& params, const ModelParams& grads, AdamState& state,
                 double learning_rate, const AdamSettings& settings) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(settings.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(settings.beta2, static_cast<double>(state.step));
  auto layer = [&](DenseLayer& w, const DenseLayer& g, DenseLayer& m, DenseLayer& v) {
    adam_step(w.weights, g.weights, m.weights, v.weights, learning_rate, bc1, bc2, settings);
    adam_step(w.bias, g.bias, m.bias, v.bias, learning_rate, bc1, bc2, settings);
  };
  layer(params.g1, grads.g1, state.m.g1, state.v.g1);
  layer(params.g2, grads.g2, state.m.g2, state.v.g2);
  layer(params.c, grads.c, state.m.c, state.v.c);
}

TrainState init_state(const AdaptationDataset& dataset, const TrainConfig& config) {
  config.validate();
  dataset.validate();
  const ModelShape shape{dataset.input_dim(), config.hidden_dim, config.feature_dim,
                         dataset.num_classes()};
  TrainState st;
  st.params = ModelParams::uniform_init(shape, config.seed);
  st.adam = AdamState::zeros_like(st.params);
  return st;
}

TrainTrace pretrain(const AdaptationDataset& dataset, const TrainConfig& config, TrainState& state,
                    const EpochObserver& observer) {
  config.validate();
  dataset.validate();
  const StackedBatch batch = dataset.stacked();
  TrainTrace trace;
  for (int e = 0; e < config.pretrain_epochs; ++e) {
    LossEvaluation eval = evaluate_losses(state.params, batch, std::nullopt, ce_only(), true);
    if (!std::isfinite(eval.losses.total)) {
      throw NumericalError("pretrain: non-finite loss at epoch " + std::to_string(e));
    }
    adam_update(state.params, *eval.grads, state.adam, config.learning_rate, config.adam);
    EpochRecord rec;
    rec.epoch = e;
    rec.phase = TrainPhase::Pretrain;
    rec.losses = eval.losses;
    if (observer) observer(state.params, rec);
    trace.epochs.push_back(rec);
  }
  return trace;
}

Matrix predict_pseudo_labels(const ModelParams& params, const Matrix& target, PseudoLabelMode mode) {
  Matrix probs = forward_c(params, forward_g(params, target));
  if (mode == PseudoLabelMode::Soft) return probs;
  return one_hot(argmax_labels(probs), static_cast<int>(probs.rows()));
}

void init_pseudo_labels(AdaptationDataset& dataset, const ModelParams& params,
                        PseudoLabelMode mode) {
  dataset.pseudo_labels = predict_pseudo_labels(params, dataset.target, mode);
}

LossBreakdown adapt_epoch(AdaptationDataset& dataset, const TrainConfig& config, TrainState& state) {
  if (!dataset.pseudo_labels) {
    throw PreconditionError("adapt_epoch: pseudo-labels are not initialized");
  }
  const StackedBatch batch = dataset.stacked();
  LossEvaluation eval =
      evaluate_losses(state.params, batch, dataset.pseudo_labels, config.loss_settings(), true,
                      &state.cond_cache);
  if (!std::isfinite(eval.losses.total)) throw NumericalError("adapt_epoch: non-finite loss");
  adam_update(state.params, *eval.grads, state.adam, config.learning_rate, config.adam);
  init_pseudo_labels(dataset, state.params, config.pseudo_label_mode);
  return eval.losses;
}

FitResult fit(AdaptationDataset dataset, const TrainConfig& config, const EpochObserver& observer) {
  TrainState state = init_state(dataset, config);
  FitResult result;
  result.trace = pretrain(dataset, config, state, observer);
  result.pretrained = state.params;
  init_pseudo_labels(dataset, state.params, config.pseudo_label_mode);
  for (int e = 0; e < config.adapt_epochs; ++e) {
    EpochRecord rec;
    rec.epoch = e;
    rec.phase = TrainPhase::Adapt;
    try {
      rec.losses = adapt_epoch(dataset, config, state);
    } catch (const NumericalError& err) {
      throw NumericalError("adaptation epoch " + std::to_string(e) + ": " + err.what());
    }
    if (observer) observer(state.params, rec);
    result.trace.epochs.push_back(rec);
  }
  result.params = std::move(state.params);
  result.pseudo_labels = *dataset.pseudo_labels;
  return result;
}

double accuracy(const ModelParams& params, const Matrix& X, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != X.cols()) {
    throw InputError("accuracy: label count must match the sample count");
  }
  if (X.cols() == 0) throw InputError("accuracy: no samples");
  const auto pred = argmax_labels(forward_c(params, forward_g(params, X)));
  Index hits = 0;
  for (std::size_t j = 0; j < labels.size(); ++j) hits += pred[j] == labels[j] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace mci

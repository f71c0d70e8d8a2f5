#pragma once

// Full-batch training for single- and multi-source adaptation:
//   pretrain on the source cross-entropy -> initialize target pseudo-labels
//   -> repeated adaptation epochs on L_CE + beta1 L_COND + beta2 L_Ent,
//      refreshing the pseudo-labels after every parameter update.
// One Adam state runs through both phases.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mci/dataset.hpp"
#include "mci/model.hpp"

namespace mci {

enum class PseudoLabelMode { Hard, Soft };

std::string to_string(PseudoLabelMode mode);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double beta1 = 1e-2;
  double beta2 = 5e-3;
  double epsilon = 1e-5;
  int pretrain_epochs = 200;
  int adapt_epochs = 100;
  double learning_rate = 1e-3;
  AdamSettings adam;
  std::uint64_t seed = 0;
  PseudoLabelMode pseudo_label_mode = PseudoLabelMode::Hard;
  Index hidden_dim = 512;
  Index feature_dim = 512;
  /// Record L_COND in the trace even when beta1 = 0.
  bool evaluate_disabled_terms = true;

  void validate() const;
  LossSettings loss_settings() const;
};

struct AdamState {
  ModelParams m;
  ModelParams v;
  long long step = 0;

  static AdamState zeros_like(const ModelParams& params);
};

void adam_update(ModelParams& params, const ModelParams& grads, AdamState& state,
                 double learning_rate, const AdamSettings& settings);

struct TrainState {
  ModelParams params;
  AdamState adam;
  CondTermCache cond_cache;
};

/// Seeded uniform initialization sized from the dataset and config.
TrainState init_state(const AdaptationDataset& dataset, const TrainConfig& config);

enum class TrainPhase { Pretrain, Adapt };

struct EpochRecord {
  int epoch = 0;  // 0-based within its phase
  TrainPhase phase = TrainPhase::Pretrain;
  LossBreakdown losses;
  std::optional<double> target_accuracy;  // filled by an observer holding ground truth
  std::optional<double> cond_statistic;   // optional dependence tracking
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
};

/// Called after each epoch with the updated parameters; may fill the
/// optional fields of the record.
using EpochObserver = std::function<void(const ModelParams&, EpochRecord&)>;

/// `config.pretrain_epochs` Adam steps on the (summed) source cross-entropy.
TrainTrace pretrain(const AdaptationDataset& dataset, const TrainConfig& config, TrainState& state,
                    const EpochObserver& observer = {});

/// Predictions of the current model on the target: argmax one-hot (ties to
/// the lowest class) in Hard mode, probabilities in Soft mode.
Matrix predict_pseudo_labels(const ModelParams& params, const Matrix& target, PseudoLabelMode mode);

void init_pseudo_labels(AdaptationDataset& dataset, const ModelParams& params,
                        PseudoLabelMode mode);

/// One Adam step on the full objective, then a pseudo-label refresh.
/// Returns the losses evaluated before the step.
LossBreakdown adapt_epoch(AdaptationDataset& dataset, const TrainConfig& config, TrainState& state);

struct FitResult {
  ModelParams params;
  ModelParams pretrained;
  TrainTrace trace;
  Matrix pseudo_labels;
};

FitResult fit(AdaptationDataset dataset, const TrainConfig& config,
              const EpochObserver& observer = {});

/// Fraction of columns whose argmax prediction equals `labels`.
double accuracy(const ModelParams& params, const Matrix& X, std::span<const int> labels);

}  // namespace mci

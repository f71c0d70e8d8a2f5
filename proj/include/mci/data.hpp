#pragma once

// Synthetic domain-shift generators with known ground truth, and the
// delimiter-separated feature-file format:
//   f0,...,f{d-1},label,domain
// label -1 marks an unlabeled target row. The highest domain id is the target.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mci/dataset.hpp"
#include "mci/dependence.hpp"

namespace mci {

enum class SyntheticKind { ShiftedBlobs, RotatedMoons, ConditionalChain };
enum class ChainMode { Independent, Offset };

std::string to_string(SyntheticKind kind);
std::string to_string(ChainMode mode);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::ShiftedBlobs;
  int classes = 4;
  int samples_per_class_per_domain = 50;
  int dim = 2;
  /// Target shift length in units of noise_sd (blobs).
  double shift = 2.5;
  /// Shift direction; empty means the all-ones diagonal. Normalized on use.
  std::vector<double> shift_direction;
  /// Target rotation in radians (moons).
  double angle = 0.5;
  double noise_sd = 1.0;
  int num_sources = 1;
  std::uint64_t seed = 0;
  /// Distance between neighbouring class means in units of noise_sd.
  double class_separation = 4.0;
  ChainMode chain_mode = ChainMode::Independent;
  /// Chain: domain 0 class prior is 1/K + tilt * s_c, domain 1 uses -s_c,
  /// with s_c running linearly from +1 to -1.
  double prior_tilt = 0.1;
  /// Chain, Offset mode: mean offset of domain 1 along f0, in units of noise_sd.
  double offset = 2.0;

  void validate() const;
};

/// Evaluation-only target labels; empty when the target is unlabeled.
struct TargetTruth {
  std::vector<int> labels;

  bool available() const { return !labels.empty(); }
};

struct LabeledDataset {
  AdaptationDataset dataset;
  TargetTruth truth;
};

/// Class means for the blob scenarios: a square grid over f0, f1 with
/// spacing class_separation * noise_sd (a line along f0 when dim = 1).
Matrix blob_means(const SyntheticSpec& spec);

/// Class-balanced blobs. Sources are unshifted; the target is shifted by
/// shift * noise_sd along shift_direction.
LabeledDataset make_shifted_blobs(const SyntheticSpec& spec);

/// Two interleaved half-moons (K = 2, dim = 2); the target is rotated by
/// `angle` about the data centre.
LabeledDataset make_rotated_moons(const SyntheticSpec& spec);

struct ChainSample {
  CondVariables vars;  // X: d x n, Y: K x n, Z: 2 x n
  std::vector<int> classes;
  std::vector<int> domains;
};

/// Z -> Y -> X chain over two domains with samples_per_class_per_domain * K
/// samples each. Independent mode gives X _|_ Z | Y; Offset mode shifts
/// domain 1 along f0 within every class.
ChainSample make_conditional_chain(const SyntheticSpec& spec);

/// Dispatches on spec.kind for the adaptation scenarios.
LabeledDataset make_synthetic(const SyntheticSpec& spec);

LabeledDataset load_features(std::istream& in, char delimiter = ',');
LabeledDataset load_features(const std::filesystem::path& path, char delimiter = ',');

/// Full-precision text; reloading reproduces every value bit-exactly.
void write_features(std::ostream& out, const AdaptationDataset& dataset, const TargetTruth& truth,
                    char delimiter = ',');
void write_features(const std::filesystem::path& path, const AdaptationDataset& dataset,
                    const TargetTruth& truth, char delimiter = ',');

}  // namespace mci

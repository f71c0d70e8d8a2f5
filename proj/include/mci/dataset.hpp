#pragma once

#include <optional>
#include <vector>

#include "mci/model.hpp"

namespace mci {

struct SourceDomain {
  Matrix X;  // d x n_s
  Matrix Y;  // K x n_s, one-hot
};

/// Labeled source domains plus the unlabeled target. Target ground truth is
/// deliberately not a member; evaluation code holds it separately.
struct AdaptationDataset {
  std::vector<SourceDomain> sources;
  Matrix target;                       // d x n_t
  std::optional<Matrix> pseudo_labels;  // K x n_t once initialized

  static AdaptationDataset single_source(Matrix Xs, Matrix Ys, Matrix Xt);
  static AdaptationDataset multi_source(std::vector<SourceDomain> sources, Matrix Xt);

  int num_sources() const { return static_cast<int>(sources.size()); }
  int num_classes() const;
  Index input_dim() const { return target.rows(); }
  Index n_source() const;
  Index n_target() const { return target.cols(); }
  Index n() const { return n_source() + n_target(); }

  /// (N + 1) x n one-hot domain matrix: source i -> row i, target -> row N.
  Matrix domain_matrix() const;
  /// Domain index per stacked column.
  std::vector<int> domain_ids() const;
  /// Sources in order, then the target.
  StackedBatch stacked() const;

  /// Throws InputError on inconsistent shapes or non-one-hot source labels.
  void validate() const;
};

}  // namespace mci

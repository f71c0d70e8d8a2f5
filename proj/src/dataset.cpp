#include "mci/dataset.hpp"

#include "mci/indicator.hpp"

namespace mci {

AdaptationDataset AdaptationDataset::single_source(Matrix Xs, Matrix Ys, Matrix Xt) {
  std::vector<SourceDomain> sources;
  sources.push_back(SourceDomain{std::move(Xs), std::move(Ys)});
  return multi_source(std::move(sources), std::move(Xt));
}

AdaptationDataset AdaptationDataset::multi_source(std::vector<SourceDomain> sources, Matrix Xt) {
  AdaptationDataset ds;
  ds.sources = std::move(sources);
  ds.target = std::move(Xt);
  ds.validate();
  return ds;
}

int AdaptationDataset::num_classes() const {
  return sources.empty() ? 0 : static_cast<int>(sources.front().Y.rows());
}

Index AdaptationDataset::n_source() const {
  Index total = 0;
  for (const auto& s : sources) total += s.X.cols();
  return total;
}

Matrix AdaptationDataset::domain_matrix() const {
  const auto ids = domain_ids();
  return one_hot(ids, num_sources() + 1);
}

std::vector<int> AdaptationDataset::domain_ids() const {
  std::vector<int> ids;
  ids.reserve(n());
  for (int i = 0; i < num_sources(); ++i) ids.insert(ids.end(), sources[i].X.cols(), i);
  ids.insert(ids.end(), n_target(), num_sources());
  return ids;
}

StackedBatch AdaptationDataset::stacked() const {
  StackedBatch batch;
  const Index ns = n_source();
  batch.n_source = ns;
  batch.X.resize(input_dim(), n());
  batch.Ys.resize(num_classes(), ns);
  Index col = 0;
  for (const auto& s : sources) {
    batch.X.middleCols(col, s.X.cols()) = s.X;
    batch.Ys.middleCols(col, s.X.cols()) = s.Y;
    col += s.X.cols();
  }
  batch.X.rightCols(n_target()) = target;
  batch.Z = domain_matrix();
  return batch;
}

void AdaptationDataset::validate() const {
  if (sources.empty()) throw InputError("dataset: at least one source domain is required");
  const Index d = target.rows();
  const Index K = sources.front().Y.rows();
  if (K < 1) throw InputError("dataset: source labels have no classes");
  if (target.cols() < 1) throw InputError("dataset: target domain is empty");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& s = sources[i];
    const std::string which = "dataset: source " + std::to_string(i);
    if (s.X.cols() < 1) throw InputError(which + " is empty");
    if (s.X.rows() != d) throw InputError(which + " feature dimension differs from the target");
    if (s.Y.rows() != K || s.Y.cols() != s.X.cols()) throw InputError(which + " labels must be K x n_s");
    if (!is_one_hot(s.Y)) throw InputError(which + " labels must be one-hot");
  }
  if (pseudo_labels && (pseudo_labels->rows() != K || pseudo_labels->cols() != target.cols())) {
    throw InputError("dataset: pseudo-labels must be K x n_target");
  }
}

}  // namespace mci

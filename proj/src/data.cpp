#include "mci/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "mci/errors.hpp"
#include "mci/indicator.hpp"
#include "mci/numeric_text.hpp"

namespace mci {

namespace {

using Rng = std::mt19937_64;

Matrix gaussian_block(Rng& rng, const Vector& mean, double sd, Index count) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix X(mean.size(), count);
  for (Index j = 0; j < count; ++j) {
    for (Index i = 0; i < mean.size(); ++i) X(i, j) = mean(i) + sd * normal(rng);
  }
  return X;
}

Vector shift_vector(const SyntheticSpec& spec) {
  Vector dir(spec.dim);
  if (spec.shift_direction.empty()) {
    dir.setOnes();
  } else {
    for (int i = 0; i < spec.dim; ++i) dir(i) = spec.shift_direction[i];
  }
  return dir.normalized() * (spec.shift * spec.noise_sd);
}

struct Blobs {
  Matrix X;
  std::vector<int> labels;
};

Blobs sample_blobs(Rng& rng, const Matrix& means, const Vector& offset, double sd, int per_class) {
  const int K = static_cast<int>(means.cols());
  Blobs b;
  b.X.resize(means.rows(), static_cast<Index>(K) * per_class);
  for (int c = 0; c < K; ++c) {
    b.X.middleCols(static_cast<Index>(c) * per_class, per_class) =
        gaussian_block(rng, means.col(c) + offset, sd, per_class);
    b.labels.insert(b.labels.end(), per_class, c);
  }
  return b;
}

Blobs sample_moons(Rng& rng, const SyntheticSpec& spec, double angle) {
  const int m = spec.samples_per_class_per_domain;
  std::uniform_real_distribution<double> unit(0.0, std::numbers::pi);
  std::normal_distribution<double> normal(0.0, spec.noise_sd);
  const double cx = 0.5;
  const double cy = 0.25;
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  Blobs b;
  b.X.resize(2, 2 * static_cast<Index>(m));
  for (int c = 0; c < 2; ++c) {
    for (int j = 0; j < m; ++j) {
      const double t = unit(rng);
      double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
      double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
      x += normal(rng);
      y += normal(rng);
      const Index col = static_cast<Index>(c) * m + j;
      b.X(0, col) = cx + ca * (x - cx) - sa * (y - cy);
      b.X(1, col) = cy + sa * (x - cx) + ca * (y - cy);
      b.labels.push_back(c);
    }
  }
  return b;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw ParseError("line " + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::ShiftedBlobs: return "shifted-blobs";
    case SyntheticKind::RotatedMoons: return "rotated-moons";
    case SyntheticKind::ConditionalChain: return "conditional-chain";
  }
  return "unknown";
}

std::string to_string(ChainMode mode) {
  return mode == ChainMode::Independent ? "independent" : "offset";
}

void SyntheticSpec::validate() const {
  if (samples_per_class_per_domain < 2) throw ConfigError("samples per class per domain must be >= 2");
  if (classes < 2) throw ConfigError("at least 2 classes are required");
  if (dim < 1) throw ConfigError("dimension must be >= 1");
  if (!(noise_sd > 0.0)) throw ConfigError("noise_sd must be > 0");
  if (num_sources < 1) throw ConfigError("at least one source domain is required");
  if (!std::isfinite(shift) || !std::isfinite(angle) || !std::isfinite(offset) ||
      !std::isfinite(class_separation)) {
    throw ConfigError("scenario parameters must be finite");
  }
  if (!shift_direction.empty()) {
    if (static_cast<int>(shift_direction.size()) != dim) {
      throw ConfigError("shift direction must have `dim` entries");
    }
    double norm = 0.0;
    for (double v : shift_direction) norm += v * v;
    if (!(norm > 0.0) || !std::isfinite(norm)) throw ConfigError("shift direction must be non-zero");
  }
  if (kind == SyntheticKind::RotatedMoons && (classes != 2 || dim != 2)) {
    throw ConfigError("rotated moons need 2 classes in 2 dimensions");
  }
  if (kind == SyntheticKind::ConditionalChain) {
    if (!(prior_tilt >= 0.0) || !(prior_tilt < 1.0 / classes)) {
      throw ConfigError("prior tilt must lie in [0, 1/K)");
    }
  }
}

Matrix blob_means(const SyntheticSpec& spec) {
  const int K = spec.classes;
  const double step = spec.class_separation * spec.noise_sd;
  Matrix means = Matrix::Zero(spec.dim, K);
  if (spec.dim == 1) {
    for (int c = 0; c < K; ++c) means(0, c) = step * c;
    return means;
  }
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(K))));
  for (int c = 0; c < K; ++c) {
    means(0, c) = step * (c % side);
    means(1, c) = step * (c / side);
  }
  return means;
}

LabeledDataset make_shifted_blobs(const SyntheticSpec& spec) {
  spec.validate();
  if (spec.kind != SyntheticKind::ShiftedBlobs) throw ConfigError("spec is not a shifted-blobs scenario");
  Rng rng(spec.seed);
  const Matrix means = blob_means(spec);
  const Vector none = Vector::Zero(spec.dim);
  std::vector<SourceDomain> sources;
  for (int i = 0; i < spec.num_sources; ++i) {
    Blobs b = sample_blobs(rng, means, none, spec.noise_sd, spec.samples_per_class_per_domain);
    sources.push_back(SourceDomain{std::move(b.X), one_hot(b.labels, spec.classes)});
  }
  Blobs t = sample_blobs(rng, means, shift_vector(spec), spec.noise_sd,
                         spec.samples_per_class_per_domain);
  LabeledDataset out{AdaptationDataset::multi_source(std::move(sources), std::move(t.X)), {}};
  out.truth.labels = std::move(t.labels);
  return out;
}

LabeledDataset make_rotated_moons(const SyntheticSpec& spec) {
  spec.validate();
  if (spec.kind != SyntheticKind::RotatedMoons) throw ConfigError("spec is not a rotated-moons scenario");
  Rng rng(spec.seed);
  std::vector<SourceDomain> sources;
  for (int i = 0; i < spec.num_sources; ++i) {
    Blobs b = sample_moons(rng, spec, 0.0);
    sources.push_back(SourceDomain{std::move(b.X), one_hot(b.labels, 2)});
  }
  Blobs t = sample_moons(rng, spec, spec.angle);
  LabeledDataset out{AdaptationDataset::multi_source(std::move(sources), std::move(t.X)), {}};
  out.truth.labels = std::move(t.labels);
  return out;
}

ChainSample make_conditional_chain(const SyntheticSpec& spec) {
  spec.validate();
  if (spec.kind != SyntheticKind::ConditionalChain) {
    throw ConfigError("scenario is not a conditional chain");
  }
  const int K = spec.classes;
  const int per_domain = spec.samples_per_class_per_domain * K;
  // Class means on a line along f0.
  Matrix means = Matrix::Zero(spec.dim, K);
  for (int c = 0; c < K; ++c) means(0, c) = spec.class_separation * spec.noise_sd * c;
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ChainSample out;
  const Index n = 2 * static_cast<Index>(per_domain);
  out.vars.X.resize(spec.dim, n);
  Index col = 0;
  for (int z = 0; z < 2; ++z) {
    std::vector<double> prior(K);
    for (int c = 0; c < K; ++c) {
      const double s = static_cast<double>(K - 1 - 2 * c) / static_cast<double>(K - 1);
      prior[c] = 1.0 / K + (z == 0 ? 1.0 : -1.0) * spec.prior_tilt * s;
    }
    std::discrete_distribution<int> draw_class(prior.begin(), prior.end());
    for (int j = 0; j < per_domain; ++j, ++col) {
      const int c = draw_class(rng);
      for (int i = 0; i < spec.dim; ++i) {
        out.vars.X(i, col) = means(i, c) + spec.noise_sd * normal(rng);
      }
      if (z == 1 && spec.chain_mode == ChainMode::Offset) {
        out.vars.X(0, col) += spec.offset * spec.noise_sd;
      }
      out.classes.push_back(c);
      out.domains.push_back(z);
    }
  }
  out.vars.Y = one_hot(out.classes, K);
  out.vars.Z = one_hot(out.domains, 2);
  return out;
}

LabeledDataset make_synthetic(const SyntheticSpec& spec) {
  switch (spec.kind) {
    case SyntheticKind::ShiftedBlobs: return make_shifted_blobs(spec);
    case SyntheticKind::RotatedMoons: return make_rotated_moons(spec);
    case SyntheticKind::ConditionalChain:
      throw ConfigError("the conditional chain is not an adaptation scenario");
  }
  throw ConfigError("unknown scenario kind");
}

LabeledDataset load_features(std::istream& in, char delimiter) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("feature file is empty");
  ++line_no;
  const auto header = split(line, delimiter);
  std::optional<std::size_t> label_col;
  std::optional<std::size_t> domain_col;
  std::size_t d = 0;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "label") {
      label_col = i;
    } else if (header[i] == "domain") {
      domain_col = i;
    } else if (header[i] == "f" + std::to_string(d)) {
      ++d;
    } else {
      parse_fail(line_no, "unexpected column '" + std::string(header[i]) + "'");
    }
  }
  if (!label_col) parse_fail(line_no, "missing column 'label'");
  if (!domain_col) parse_fail(line_no, "missing column 'domain'");
  if (d == 0) parse_fail(line_no, "no feature columns (expected f0, f1, ...)");

  struct Row {
    std::vector<double> x;
    int label;
    std::size_t line;
  };
  std::map<int, std::vector<Row>> by_domain;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, delimiter);
    if (cells.size() != header.size()) {
      parse_fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                              std::to_string(cells.size()));
    }
    Row row{{}, 0, line_no};
    std::optional<long long> domain;
    std::size_t f = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == *label_col) {
        const auto v = parse_integer(cells[i]);
        if (!v || *v < -1 || *v > 1'000'000) {
          parse_fail(line_no, "invalid label '" + std::string(cells[i]) + "'");
        }
        row.label = static_cast<int>(*v);
      } else if (i == *domain_col) {
        domain = parse_integer(cells[i]);
        if (!domain || *domain < 0 || *domain > 1'000'000) {
          parse_fail(line_no, "invalid domain '" + std::string(cells[i]) + "'");
        }
      } else {
        const auto v = parse_double(cells[i]);
        if (!v || !std::isfinite(*v)) {
          parse_fail(line_no, "invalid value '" + std::string(cells[i]) + "' in column " +
                                  std::string(header[i]));
        }
        row.x.push_back(*v);
        ++f;
      }
    }
    by_domain[static_cast<int>(*domain)].push_back(std::move(row));
  }
  if (by_domain.empty()) throw ParseError("feature file has no data rows");
  const int target_id = by_domain.rbegin()->first;
  if (target_id < 1) throw ParseError("feature file needs at least one source and one target domain");
  for (int z = 0; z <= target_id; ++z) {
    if (!by_domain.count(z)) {
      throw ParseError("domain " + std::to_string(z) + " is empty (domains must be 0.." +
                       std::to_string(target_id) + ")");
    }
  }

  int max_label = -1;
  for (const auto& [z, rows] : by_domain) {
    for (const auto& r : rows) {
      if (z < target_id && r.label < 0) {
        parse_fail(r.line, "source row without a label");
      }
      max_label = std::max(max_label, r.label);
    }
  }
  const int K = max_label + 1;
  if (K < 1) throw ParseError("feature file has no labels");

  const auto& target_rows = by_domain.at(target_id);
  const bool target_labeled = target_rows.front().label >= 0;
  for (const auto& r : target_rows) {
    if ((r.label >= 0) != target_labeled) {
      parse_fail(r.line, "target rows must be either all labeled or all unlabeled (-1)");
    }
  }

  auto to_matrix = [d](const std::vector<Row>& rows) {
    Matrix X(static_cast<Index>(d), static_cast<Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
      for (std::size_t i = 0; i < d; ++i) X(static_cast<Index>(i), static_cast<Index>(j)) = rows[j].x[i];
    }
    return X;
  };
  std::vector<SourceDomain> sources;
  for (int z = 0; z < target_id; ++z) {
    const auto& rows = by_domain.at(z);
    std::vector<int> labels;
    for (const auto& r : rows) labels.push_back(r.label);
    sources.push_back(SourceDomain{to_matrix(rows), one_hot(labels, K)});
  }
  LabeledDataset out{AdaptationDataset::multi_source(std::move(sources), to_matrix(target_rows)), {}};
  if (target_labeled) {
    for (const auto& r : target_rows) out.truth.labels.push_back(r.label);
  }
  return out;
}

LabeledDataset load_features(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open feature file " + path.string());
  try {
    return load_features(in, delimiter);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_features(std::ostream& out, const AdaptationDataset& dataset, const TargetTruth& truth,
                    char delimiter) {
  dataset.validate();
  if (truth.available() && static_cast<Index>(truth.labels.size()) != dataset.n_target()) {
    throw InputError("target truth length must match the target sample count");
  }
  const Index d = dataset.input_dim();
  for (Index i = 0; i < d; ++i) out << 'f' << i << delimiter;
  out << "label" << delimiter << "domain\n";
  auto write_rows = [&](const Matrix& X, auto label_of, int domain) {
    for (Index j = 0; j < X.cols(); ++j) {
      for (Index i = 0; i < d; ++i) out << format_double(X(i, j)) << delimiter;
      out << label_of(j) << delimiter << domain << '\n';
    }
  };
  for (int s = 0; s < dataset.num_sources(); ++s) {
    const auto labels = argmax_labels(dataset.sources[s].Y);
    write_rows(dataset.sources[s].X, [&](Index j) { return labels[j]; }, s);
  }
  write_rows(
      dataset.target,
      [&](Index j) { return truth.available() ? truth.labels[j] : -1; }, dataset.num_sources());
}

void write_features(const std::filesystem::path& path, const AdaptationDataset& dataset,
                    const TargetTruth& truth, char delimiter) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write feature file " + path.string());
  write_features(out, dataset, truth, delimiter);
  if (!out) throw InputError("failed while writing " + path.string());
}

}  // namespace mci

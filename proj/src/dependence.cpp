#include "mci/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "mci/indicator.hpp"

namespace mci {

namespace {

void require_same_n(Index a, Index b, const char* what) {
  if (a != b) {
    throw InputError(std::string(what) + ": sample count mismatch (" + std::to_string(a) +
                     " vs " + std::to_string(b) + ")");
  }
}

void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("epsilon must be positive, got " + std::to_string(epsilon));
  }
}

// Tr(A B) for symmetric A, B.
double trace_of_product(const Matrix& A, const Matrix& B) {
  return A.cwiseProduct(B).sum();
}

// Tr(P A P^T B) = sum_ij A(perm[i], perm[j]) B(i, j).
double permuted_trace(const Matrix& A, const Matrix& B, const std::vector<Index>& perm) {
  const Index n = A.rows();
  double acc = 0.0;
  for (Index j = 0; j < n; ++j) {
    const Index pj = perm[j];
    for (Index i = 0; i < n; ++i) acc += A(perm[i], pj) * B(i, j);
  }
  return acc;
}

// S R_Xt S with S = I - R_Y.
Matrix conditioned(const Matrix& RXt, const Matrix& RY) {
  const Index n = RXt.rows();
  const Matrix S = Matrix::Identity(n, n) - RY;
  Matrix M = S * RXt * S;
  return 0.5 * (M + M.transpose());
}

double pvalue(double observed, const std::vector<double>& null_stats) {
  const double tol = 1e-12 * std::max(1.0, std::abs(observed));
  const auto exceed = std::count_if(null_stats.begin(), null_stats.end(),
                                    [&](double t) { return t >= observed - tol; });
  return static_cast<double>(1 + exceed) / static_cast<double>(1 + null_stats.size());
}

std::vector<double> permutation_null(const Matrix& A, const Matrix& B,
                                     std::span<const int> strata, const PermutationOptions& opts) {
  const Index n = A.rows();
  std::map<int, std::vector<Index>> groups;
  for (Index i = 0; i < n; ++i) groups[strata.empty() ? 0 : strata[i]].push_back(i);

  std::vector<double> out;
  out.reserve(opts.permutations);
  std::vector<Index> perm(n);
  for (int r = 0; r < opts.permutations; ++r) {
    std::mt19937_64 rng(opts.seed + static_cast<std::uint64_t>(r));
    for (const auto& [label, members] : groups) {
      std::vector<Index> shuffled = members;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      for (std::size_t k = 0; k < members.size(); ++k) perm[members[k]] = shuffled[k];
    }
    out.push_back(permuted_trace(A, B, perm));
  }
  return out;
}

void require_permutations(const PermutationOptions& opts) {
  if (opts.permutations < 1) throw ConfigError("permutation test needs at least 1 permutation");
}

}  // namespace

std::string to_string(DependenceKind kind) {
  switch (kind) {
    case DependenceKind::Nocco:
      return "nocco";
    case DependenceKind::Cond:
      return "cond";
    case DependenceKind::PerClassNocco:
      return "per-class-nocco";
  }
  return "unknown";
}

DependenceReport nocco(const GramMatrix& KX, const GramMatrix& KZ, double epsilon) {
  require_epsilon(epsilon);
  require_same_n(KX.n(), KZ.n(), "nocco");
  const NormalizedGram RX = normalized_gram(KX, epsilon);
  const NormalizedGram RZ = normalized_gram(KZ, epsilon);
  DependenceReport report;
  report.kind = DependenceKind::Nocco;
  report.statistic = trace_of_product(RZ.entries(), RX.entries());
  report.n = KX.n();
  report.epsilon = epsilon;
  return report;
}

DependenceReport cond(const GramMatrix& KXt, const GramMatrix& KZt, const GramMatrix& KY,
                      double epsilon) {
  require_epsilon(epsilon);
  require_same_n(KXt.n(), KZt.n(), "cond");
  require_same_n(KXt.n(), KY.n(), "cond");
  const NormalizedGram RXt = normalized_gram(KXt, epsilon);
  const NormalizedGram RZt = normalized_gram(KZt, epsilon);
  const NormalizedGram RY = normalized_gram(KY, epsilon);
  DependenceReport report;
  report.kind = DependenceKind::Cond;
  report.statistic = trace_of_product(RZt.entries(), conditioned(RXt.entries(), RY.entries()));
  report.n = KXt.n();
  report.epsilon = epsilon;
  return report;
}

DependenceReport cond_from_blocks(const GramMatrix& KX, const GramMatrix& KZ,
                                  const GramMatrix& KY, double epsilon) {
  return cond(product_gram(KX, KY), product_gram(KZ, KY), KY, epsilon);
}

DependenceReport nocco_test(const GramMatrix& KX, const GramMatrix& KZ, double epsilon,
                            const PermutationOptions& opts) {
  require_permutations(opts);
  DependenceReport report = nocco(KX, KZ, epsilon);
  const Matrix RX = normalized_gram(KX, epsilon).entries();
  const Matrix RZ = normalized_gram(KZ, epsilon).entries();
  const auto null_stats = permutation_null(RZ, RX, {}, opts);
  report.permutation_pvalue = pvalue(report.statistic, null_stats);
  report.permutations = opts.permutations;
  return report;
}

DependenceReport cond_test(const GramMatrix& KXt, const GramMatrix& KZt, const GramMatrix& KY,
                           std::span<const int> strata, double epsilon,
                           const PermutationOptions& opts) {
  require_permutations(opts);
  require_epsilon(epsilon);
  require_same_n(KXt.n(), KZt.n(), "cond_test");
  require_same_n(KXt.n(), KY.n(), "cond_test");
  require_same_n(KXt.n(), static_cast<Index>(strata.size()), "cond_test strata");
  const Matrix RXt = normalized_gram(KXt, epsilon).entries();
  const Matrix RZt = normalized_gram(KZt, epsilon).entries();
  const Matrix RY = normalized_gram(KY, epsilon).entries();
  const Matrix M = conditioned(RXt, RY);

  DependenceReport report;
  report.kind = DependenceKind::Cond;
  report.statistic = trace_of_product(RZt, M);
  report.n = KXt.n();
  report.epsilon = epsilon;
  const auto null_stats = permutation_null(RZt, M, strata, opts);
  report.permutation_pvalue = pvalue(report.statistic, null_stats);
  report.permutations = opts.permutations;
  return report;
}

DependenceReport per_class_nocco(const GramMatrix& KX, const GramMatrix& KZ,
                                 std::span<const int> classes, std::span<const int> domains,
                                 double epsilon) {
  require_epsilon(epsilon);
  require_same_n(KX.n(), KZ.n(), "per_class_nocco");
  require_same_n(KX.n(), static_cast<Index>(classes.size()), "per_class_nocco classes");
  require_same_n(KX.n(), static_cast<Index>(domains.size()), "per_class_nocco domains");

  std::map<int, std::vector<Index>> members;
  for (Index i = 0; i < KX.n(); ++i) members[classes[i]].push_back(i);

  DependenceReport report;
  report.kind = DependenceKind::PerClassNocco;
  report.n = KX.n();
  report.epsilon = epsilon;

  Index included = 0;
  for (const auto& [label, idx] : members) {
    std::set<int> seen;
    for (Index i : idx) seen.insert(domains[i]);
    if (idx.size() < 2 || seen.size() < 2) {
      ++report.skipped_classes;
      continue;
    }
    const GramMatrix kx(restrict_symmetric(KX.entries(), idx));
    const GramMatrix kz(restrict_symmetric(KZ.entries(), idx));
    ClassContribution c;
    c.label = label;
    c.n = static_cast<Index>(idx.size());
    c.statistic = nocco(kx, kz, epsilon).statistic;
    report.per_class.push_back(c);
    included += c.n;
  }
  if (report.per_class.empty()) {
    throw DegenerateDataError("per_class_nocco: every class was skipped (need >= 2 samples "
                              "from >= 2 domains per class)");
  }
  double total = 0.0;
  for (auto& c : report.per_class) {
    c.weight = static_cast<double>(c.n) / static_cast<double>(included);
    total += c.weight * c.statistic;
  }
  report.statistic = total;
  return report;
}

std::string to_string(ExtendedBandwidth mode) {
  return mode == ExtendedBandwidth::PerBlock ? "per-block" : "shared";
}

namespace {

double stacked_bandwidth(const Matrix& A, const Matrix& B) {
  Matrix AB(A.rows() + B.rows(), A.cols());
  AB << A, B;
  return mean_sq_dist_bandwidth(AB);
}

}  // namespace

CondGrams build_cond_grams(const CondVariables& v, ExtendedBandwidth mode) {
  const Index n = v.X.cols();
  if (v.Y.cols() != n || v.Z.cols() != n) {
    throw InputError("build_cond_grams: X, Y, Z must have the same number of columns");
  }
  GramMatrix KX = gram(v.X, KernelConfig::fitted(v.X));
  GramMatrix KY = gram(v.Y, KernelConfig::fitted_or_unit(v.Y));
  GramMatrix KZ = gram(v.Z, KernelConfig::fitted_or_unit(v.Z));
  if (mode == ExtendedBandwidth::PerBlock) {
    GramMatrix KXt = product_gram(KX, KY);
    GramMatrix KZt = product_gram(KZ, KY);
    return CondGrams{std::move(KX), std::move(KY), std::move(KZ), std::move(KXt), std::move(KZt)};
  }
  // exp(-(|dx|^2 + |dy|^2) / s) = exp(-|dx|^2 / s) * exp(-|dy|^2 / s)
  const KernelConfig xy = KernelConfig::fixed(stacked_bandwidth(v.X, v.Y));
  const double zy_sq = stacked_bandwidth(v.Z, v.Y);
  const KernelConfig zy = KernelConfig::fixed(zy_sq > 0.0 ? zy_sq : 1.0);
  GramMatrix KXt = product_gram(gram(v.X, xy), gram(v.Y, xy));
  GramMatrix KZt = product_gram(gram(v.Z, zy), gram(v.Y, zy));
  return CondGrams{std::move(KX), std::move(KY), std::move(KZ), std::move(KXt), std::move(KZt)};
}

DependenceReport cond_statistic(const CondVariables& v, double epsilon, ExtendedBandwidth mode) {
  const CondGrams g = build_cond_grams(v, mode);
  return cond(g.KXt, g.KZt, g.KY, epsilon);
}

double default_epsilon_schedule(Index n) {
  return std::pow(static_cast<double>(n), -0.25);
}

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 == 1 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

ConvergenceProbe convergence_probe(const CiScenario& scenario, std::span<const Index> sizes,
                                   const EpsilonSchedule& schedule, int repeats,
                                   std::uint64_t seed) {
  if (sizes.empty()) throw ConfigError("convergence_probe: no sizes given");
  if (repeats < 1) throw ConfigError("convergence_probe: repeats must be >= 1");
  ConvergenceProbe probe;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    ConvergencePoint p;
    p.n = sizes[k];
    p.epsilon = schedule(p.n);
    require_epsilon(p.epsilon);
    for (int r = 0; r < repeats; ++r) {
      const CondVariables v = scenario(p.n, seed + static_cast<std::uint64_t>(r));
      p.statistics.push_back(cond_statistic(v, p.epsilon).statistic);
    }
    p.median = median(p.statistics);
    if (k > 0) {
      const auto& prev = probe.points.back();
      if (!(p.epsilon < prev.epsilon)) {
        probe.warnings.push_back("epsilon does not shrink between n=" + std::to_string(prev.n) +
                                 " and n=" + std::to_string(p.n));
      }
      const double growth_prev = std::pow(prev.epsilon, 3) * static_cast<double>(prev.n);
      const double growth = std::pow(p.epsilon, 3) * static_cast<double>(p.n);
      if (!(growth > growth_prev)) {
        probe.warnings.push_back("eps^3 * n does not grow between n=" + std::to_string(prev.n) +
                                 " and n=" + std::to_string(p.n));
      }
    }
    probe.points.push_back(std::move(p));
  }
  return probe;
}

}  // namespace mci

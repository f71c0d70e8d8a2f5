#pragma once

// Kernel dependence statistics:
//   NOCCO  I(X, Z)     = Tr(R_Z R_X)
//   COND   I(X, Z | Y) = Tr(R_Zt S R_Xt S),  S = I - R_Y,
// where Xt = (X, Y) and Zt = (Z, Y) use product kernels, plus the per-class
// NOCCO average and within-class permutation tests.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mci/kernel.hpp"

namespace mci {

enum class DependenceKind { Nocco, Cond, PerClassNocco };

std::string to_string(DependenceKind kind);

struct ClassContribution {
  int label = 0;
  Index n = 0;
  double weight = 0.0;
  double statistic = 0.0;
};

struct DependenceReport {
  double statistic = 0.0;
  DependenceKind kind = DependenceKind::Nocco;
  Index n = 0;
  double epsilon = 0.0;
  std::optional<double> permutation_pvalue;  // set only when permutations were requested
  int permutations = 0;
  std::vector<ClassContribution> per_class;  // PerClassNocco only
  int skipped_classes = 0;
};

/// Tr(R_Z R_X) with R = normalize(center(K), epsilon).
DependenceReport nocco(const GramMatrix& KX, const GramMatrix& KZ, double epsilon);

/// Tr(R_Zt S R_Xt S). KXt and KZt must already be the extended (product) Grams.
DependenceReport cond(const GramMatrix& KXt, const GramMatrix& KZt, const GramMatrix& KY,
                      double epsilon);

/// cond() after forming KXt = KX o KY and KZt = KZ o KY.
DependenceReport cond_from_blocks(const GramMatrix& KX, const GramMatrix& KZ,
                                  const GramMatrix& KY, double epsilon);

struct PermutationOptions {
  int permutations = 0;
  std::uint64_t seed = 0;  // replicate i draws from seed + i
};

/// NOCCO with a p-value from shuffling the Z samples.
DependenceReport nocco_test(const GramMatrix& KX, const GramMatrix& KZ, double epsilon,
                            const PermutationOptions& opts);

/// COND with a p-value from shuffling Z within each stratum (class of Y).
/// Shuffling Z inside a class permutes Zt = (Z, Y) as a whole, so each
/// replicate reuses R_Zt under the permutation.
DependenceReport cond_test(const GramMatrix& KXt, const GramMatrix& KZt, const GramMatrix& KY,
                           std::span<const int> strata, double epsilon,
                           const PermutationOptions& opts);

/// Class-weighted average of NOCCO restricted to each class. A class takes
/// part only if it has at least 2 samples spread over at least 2 domains.
/// Throws DegenerateDataError when every class is skipped.
DependenceReport per_class_nocco(const GramMatrix& KX, const GramMatrix& KZ,
                                 std::span<const int> classes, std::span<const int> domains,
                                 double epsilon);

/// Raw variables of a conditional-dependence problem: X (d x n),
/// Y (K x n class indicators), Z (m x n domain indicators).
struct CondVariables {
  Matrix X;
  Matrix Y;
  Matrix Z;
};

/// Grams with the default bandwidth rules: MeanSqDist on X, MeanSqDist (or
/// unit when constant) on the indicator blocks.
struct CondGrams {
  GramMatrix KX;
  GramMatrix KY;
  GramMatrix KZ;
  GramMatrix KXt;  // KX o KY
  GramMatrix KZt;  // KZ o KY
};

/// How the extended variables (X, Y) and (Z, Y) get their bandwidth.
/// PerBlock fits sigma^2 on each block and multiplies the Grams; Shared fits
/// one sigma^2 on the stacked rows, i.e. a single Gaussian on the
/// concatenation. K_Y for R_Y is fitted on Y alone in both modes.
enum class ExtendedBandwidth { PerBlock, Shared };

std::string to_string(ExtendedBandwidth mode);

CondGrams build_cond_grams(const CondVariables& v,
                           ExtendedBandwidth mode = ExtendedBandwidth::PerBlock);

DependenceReport cond_statistic(const CondVariables& v, double epsilon,
                                ExtendedBandwidth mode = ExtendedBandwidth::PerBlock);

struct ConvergencePoint {
  Index n = 0;
  double epsilon = 0.0;
  std::vector<double> statistics;  // one per repeat
  double median = 0.0;
};

struct ConvergenceProbe {
  std::vector<ConvergencePoint> points;
  std::vector<std::string> warnings;
};

using CiScenario = std::function<CondVariables(Index n, std::uint64_t seed)>;
using EpsilonSchedule = std::function<double(Index n)>;

/// eps_n = n^(-1/4); satisfies eps_n -> 0 and eps_n^3 n -> inf.
double default_epsilon_schedule(Index n);

/// COND statistic of `scenario` at each size, `repeats` draws per size
/// (repeat r uses seed + r). Warns when the schedule does not shrink eps
/// while growing eps^3 n across the sizes.
ConvergenceProbe convergence_probe(const CiScenario& scenario, std::span<const Index> sizes,
                                   const EpsilonSchedule& schedule, int repeats,
                                   std::uint64_t seed);

double median(std::vector<double> values);

}  // namespace mci

#pragma once

// Distribution-discrepancy metrics used to inspect adapted features:
// biased MMD^2 and the proxy A-distance (global and class-conditional).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mci/kernel.hpp"

namespace mci {

/// Biased V-statistic mean(K_AA) + mean(K_BB) - 2 mean(K_AB).
double mmd(const Matrix& XA, const Matrix& XB, const KernelConfig& cfg);

/// mmd() with the MeanSqDist bandwidth fitted on the pooled samples.
double mmd_pooled_bandwidth(const Matrix& XA, const Matrix& XB);

struct ClassAdistance {
  int label = 0;
  Index n = 0;
  double d_A = 0.0;
  double classifier_test_error = 0.0;
};

struct AdistanceReport {
  double d_A = 0.0;                    // 2 (1 - 2 * classifier_test_error), not clamped
  double classifier_test_error = 0.0;  // held-out error of the domain discriminator
  std::optional<double> d_A_C;         // class-weighted mean of per_class d_A
  std::vector<ClassAdistance> per_class;
  int skipped_classes = 0;
};

/// Trains a logistic domain discriminator (200 full-batch gradient steps) on
/// a 50/50 split stratified by domain and reports its held-out error.
/// Needs at least 4 samples per domain.
AdistanceReport a_distance(const Matrix& XS, const Matrix& XT, std::uint64_t split_seed);

/// Global A-distance plus the class-conditional repeat. Classes with fewer
/// than 4 samples, or fewer than 2 in either domain, are skipped.
AdistanceReport a_distance(const Matrix& XS, std::span<const int> source_labels, const Matrix& XT,
                           std::span<const int> target_labels, std::uint64_t split_seed);

struct DomainDiscriminator {
  Vector mean;
  Vector scale;
  Vector weights;
  double bias = 0.0;

  /// Probability that column x comes from the target domain.
  double predict(const Eigen::Ref<const Vector>& x) const;
};

/// Logistic regression on standardized features; label 1 = target.
DomainDiscriminator train_discriminator(const Matrix& X, std::span<const int> is_target,
                                        int steps = 200);

}  // namespace mci

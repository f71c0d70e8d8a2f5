#pragma once

#include <span>
#include <vector>

#include "mci/kernel.hpp"

namespace mci {

/// K x n one-hot matrix from integer labels in [0, K).
Matrix one_hot(std::span<const int> labels, int num_classes);

/// Column-wise argmax; ties resolve to the lowest index.
std::vector<int> argmax_labels(const Matrix& indicator);

/// True when every column has exactly one entry equal to 1 and the rest 0.
bool is_one_hot(const Matrix& indicator);

}  // namespace mci

#include "mci/indicator.hpp"

#include <string>

namespace mci {

Matrix one_hot(std::span<const int> labels, int num_classes) {
  if (num_classes < 1) throw InputError("one_hot: need at least one class");
  Matrix Y = Matrix::Zero(num_classes, static_cast<Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const int c = labels[j];
    if (c < 0 || c >= num_classes) {
      throw InputError("one_hot: label " + std::to_string(c) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
    Y(c, static_cast<Index>(j)) = 1.0;
  }
  return Y;
}

std::vector<int> argmax_labels(const Matrix& indicator) {
  std::vector<int> out(indicator.cols());
  for (Index j = 0; j < indicator.cols(); ++j) {
    Index best = 0;
    for (Index i = 1; i < indicator.rows(); ++i) {
      if (indicator(i, j) > indicator(best, j)) best = i;
    }
    out[j] = static_cast<int>(best);
  }
  return out;
}

bool is_one_hot(const Matrix& indicator) {
  for (Index j = 0; j < indicator.cols(); ++j) {
    int ones = 0;
    for (Index i = 0; i < indicator.rows(); ++i) {
      const double v = indicator(i, j);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        return false;
      }
    }
    if (ones != 1) return false;
  }
  return true;
}

}  // namespace mci

#pragma once

// Flattens model parameters into one column so the finite-difference
// checker can probe them.

#include "mci/model.hpp"

namespace testing_support {

inline mci::Matrix flatten(const mci::ModelParams& p) {
  mci::Index total = 0;
  p.for_each_layer([&](const mci::DenseLayer& l) { total += l.weights.size() + l.bias.size(); });
  mci::Matrix v(total, 1);
  mci::Index at = 0;
  p.for_each_layer([&](const mci::DenseLayer& l) {
    for (mci::Index k = 0; k < l.weights.size(); ++k) v(at++, 0) = l.weights(k);
    for (mci::Index k = 0; k < l.bias.size(); ++k) v(at++, 0) = l.bias(k);
  });
  return v;
}

inline mci::ModelParams unflatten(const mci::Matrix& v, const mci::ModelShape& shape) {
  mci::ModelParams p = mci::ModelParams::zeros(shape);
  mci::Index at = 0;
  p.for_each_layer([&](mci::DenseLayer& l) {
    for (mci::Index k = 0; k < l.weights.size(); ++k) l.weights(k) = v(at++, 0);
    for (mci::Index k = 0; k < l.bias.size(); ++k) l.bias(k) = v(at++, 0);
  });
  return p;
}

}  // namespace testing_support

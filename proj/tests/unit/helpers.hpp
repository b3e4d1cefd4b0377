#pragma once

#include <vector>

#include "preqinfo/datakit.hpp"
#include "preqinfo/rng.hpp"

namespace testutil {

inline preqinfo::LabeledDataset dense(std::size_t n, std::size_t d, std::size_t k, preqinfo::RngStream rng) {
  preqinfo::LabeledDataset ds;
  ds.inputs = preqinfo::Matrix(n, d);
  for (auto& v : ds.inputs.values()) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<std::uint32_t>(rng.below(k)));
  ds.num_classes = k;
  return ds;
}

// two well-separated clusters on the first coordinate
inline preqinfo::LabeledDataset separable(std::size_t n, preqinfo::RngStream rng) {
  preqinfo::LabeledDataset ds;
  ds.inputs = preqinfo::Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t y = static_cast<std::uint32_t>(i % 2);
    ds.inputs(i, 0) = (y ? 3.0 : -3.0) + 0.3 * rng.normal();
    ds.inputs(i, 1) = rng.normal();
    ds.labels.push_back(y);
  }
  ds.num_classes = 2;
  return ds;
}

}  // namespace testutil

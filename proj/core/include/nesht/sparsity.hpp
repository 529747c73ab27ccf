#pragma once

#include <vector>

#include "nesht/param_vector.hpp"

namespace nesht {

// Number of exactly nonzero entries. No magnitude tolerance: 1e-300 counts,
// a stored 0.0 does not. Hard thresholding writes literal zeros, so the
// sparsity level of an iterate is well defined without an epsilon.
int l0_norm(const ParamVector& v);

// Indices of exactly nonzero entries, strictly increasing.
std::vector<int> support_of(const ParamVector& v);

// Index set of allowed nonzeros with capacity k; |support| <= k, entries
// strictly increasing in [0, d).
struct SparsityMask {
  std::vector<int> support;
  int k = 0;
};

// Validates and normalizes (sorts) the support. Throws std::invalid_argument
// on duplicates, out-of-range indices, or |support| > k.
SparsityMask make_mask(std::vector<int> support, int k, int d);

// L1 norm of consecutive groups of `group_size` coordinates; the last group
// may be ragged. Group g covers [g*group_size, min((g+1)*group_size, d)).
std::vector<double> feature_group_norms(const ParamVector& v, int group_size);

}  // namespace nesht

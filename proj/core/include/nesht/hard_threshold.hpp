#pragma once

#include "nesht/param_vector.hpp"

namespace nesht {

struct HtConfig {
  int k = 1;
};

// Keep the k largest-magnitude coordinates and zero the rest. Equal
// magnitudes are resolved toward the lowest index, which makes the output the
// unique Euclidean projection onto the k-sparse set with a deterministic
// tie-break. Kept coordinates are bit-identical to the input. Expected O(d)
// via nth_element. Requires 1 <= k <= dim.
ParamVector trunc(const ParamVector& theta, int k);

// Sparsity level from a truncation fraction: beta is the fraction of
// coordinates to drop, k = max(1, floor((1 - beta) * d)). beta in [0, 1).
int k_from_ratio(int d, double beta);

}  // namespace nesht

#include "nesht/sparsity.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace nesht {

int l0_norm(const ParamVector& v) {
  int count = 0;
  for (double x : v) {
    if (x != 0.0) ++count;
  }
  return count;
}

std::vector<int> support_of(const ParamVector& v) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(v.size()); ++i) {
    if (v[i] != 0.0) idx.push_back(i);
  }
  return idx;
}

SparsityMask make_mask(std::vector<int> support, int k, int d) {
  if (d < 1) throw std::invalid_argument("make_mask: d must be >= 1");
  if (k < 0 || k > d) throw std::invalid_argument("make_mask: k must be in [0, d]");
  std::sort(support.begin(), support.end());
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] < 0 || support[i] >= d) {
      throw std::invalid_argument("make_mask: index out of range: " +
                                  std::to_string(support[i]));
    }
    if (i > 0 && support[i] == support[i - 1]) {
      throw std::invalid_argument("make_mask: duplicate index " +
                                  std::to_string(support[i]));
    }
  }
  if (static_cast<int>(support.size()) > k) {
    throw std::invalid_argument("make_mask: |support| exceeds capacity k");
  }
  return SparsityMask{std::move(support), k};
}

std::vector<double> feature_group_norms(const ParamVector& v, int group_size) {
  const int d = static_cast<int>(v.size());
  if (group_size < 1 || group_size > d) {
    throw std::invalid_argument("feature_group_norms: group_size must be in [1, d]");
  }
  std::vector<double> norms;
  norms.reserve((d + group_size - 1) / group_size);
  for (int start = 0; start < d; start += group_size) {
    const int end = std::min(start + group_size, d);
    double s = 0.0;
    for (int i = start; i < end; ++i) s += std::abs(v[i]);
    norms.push_back(s);
  }
  return norms;
}

}  // namespace nesht

#include "nesht/hard_threshold.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace nesht {

ParamVector trunc(const ParamVector& theta, int k) {
  check_finite(theta, "trunc: theta");
  const int d = static_cast<int>(theta.size());
  if (k < 1 || k > d) {
    throw std::invalid_argument("trunc: k must be in [1, dim]");
  }
  if (k == d) return theta;

  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  // Strict weak order: larger magnitude first, lowest index on ties. The top-k
  // sets under this total order are nested in k, which gives the monotone
  // support property for free.
  const auto before = [&theta](int a, int b) {
    const double ma = std::abs(theta[a]);
    const double mb = std::abs(theta[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), before);

  ParamVector out(d, 0.0);
  for (int r = 0; r < k; ++r) out[idx[r]] = theta[idx[r]];
  return out;
}

int k_from_ratio(int d, double beta) {
  if (d < 1) throw std::invalid_argument("k_from_ratio: d must be >= 1");
  if (!(beta >= 0.0) || beta >= 1.0) {
    throw std::invalid_argument("k_from_ratio: beta must be in [0, 1)");
  }
  // (1 - beta) * d can land just below an integer (e.g. 0.1 * 100), so nudge
  // before flooring.
  const int k = static_cast<int>(std::floor((1.0 - beta) * d + 1e-9));
  return std::max(1, k);
}

}  // namespace nesht

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nesht {

inline constexpr const char* kVersion = "0.1.0";

// Dense real parameter vector. Every public entry point validates finiteness;
// NaN or infinity anywhere is a caller bug, not a state we propagate.
using ParamVector = std::vector<double>;

// Throw std::invalid_argument if v is empty or contains a non-finite entry.
// `what` names the offending argument in the message.
void check_finite(const ParamVector& v, const char* what);
void check_dim(const ParamVector& v, std::size_t dim, const char* what);

ParamVector zeros(std::size_t d);

double dot(std::span<const double> a, std::span<const double> b);
ParamVector add_scaled(const ParamVector& a, double s, const ParamVector& b);  // a + s*b
double l1_norm(std::span<const double> v);
double l2_norm(std::span<const double> v);
double linf_norm(std::span<const double> v);
double l2_distance(std::span<const double> a, std::span<const double> b);

// Fixed-bracketing pairwise sum. The bracketing depends only on the element
// order, never on the thread schedule, so reductions built on it replay
// bit-identically.
double pairwise_sum(std::span<const double> v);

}  // namespace nesht

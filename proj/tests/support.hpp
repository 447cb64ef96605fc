#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <random>
#include <vector>

#include "cfcnn/feature_stack.hpp"
#include "cfcnn/training.hpp"

namespace cfcnn::test {

using Rng = std::mt19937_64;

/// Stack from nested rows per slice: {{{1,2},{3,4}}, {{5,6},{7,8}}}.
inline Stack stack(std::initializer_list<std::initializer_list<std::initializer_list<double>>> slices) {
  const Index depth = static_cast<Index>(slices.size());
  const Index rows = static_cast<Index>(slices.begin()->size());
  const Index cols = static_cast<Index>(slices.begin()->begin()->size());
  Stack s(rows, cols, depth);
  Index a = 1;
  for (const auto& slice : slices) {
    Index i = 1;
    for (const auto& row : slice) {
      Index j = 1;
      for (double v : row) s(i, j++, a) = v;
      ++i;
    }
    ++a;
  }
  return s;
}

inline Stack matrix(std::initializer_list<std::initializer_list<double>> rows) { return stack({rows}); }

inline Vec1D vec(std::initializer_list<double> v) {
  Vec1D out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline double max_abs_diff(const Stack& a, const Stack& b) {
  EXPECT_EQ(a.shape(), b.shape());
  if (a.shape() != b.shape()) return INFINITY;
  return (a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff();
}

inline double max_rel_diff(const Stack& a, const Stack& b, double floor = 1e-8) {
  EXPECT_EQ(a.shape(), b.shape());
  double worst = 0.0;
  for (Index c = 0; c < a.size(); ++c) {
    const double x = a.coeffs()[c], y = b.coeffs()[c];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
  }
  return worst;
}

inline double max_gradient_diff(const GradientSet<double>& a, const GradientSet<double>& b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.dW.size(); ++t) {
    worst = std::max(worst, max_abs_diff(a.dW[t], b.dW[t]));
    worst = std::max(worst, max_abs_diff(a.dB[t], b.dB[t]));
  }
  return worst;
}

inline bool bit_equal(const GradientSet<double>& a, const GradientSet<double>& b) {
  if (a.dW.size() != b.dW.size()) return false;
  for (std::size_t t = 0; t < a.dW.size(); ++t)
    if (!(a.dW[t] == b.dW[t]) || !(a.dB[t] == b.dB[t])) return false;
  return true;
}

}  // namespace cfcnn::test

#pragma once

// Adjusted Rand index between two labelings; test-side oracle helper.

#include <cstdint>
#include <map>
#include <vector>

inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, std::int64_t> joint;
  std::map<int, std::int64_t> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++ca[a[i]];
    ++cb[b[i]];
  }
  auto comb2 = [](std::int64_t n) { return n * (n - 1) / 2.0; };
  double sum_joint = 0, sum_a = 0, sum_b = 0;
  for (const auto& [key, n] : joint) sum_joint += comb2(n);
  for (const auto& [key, n] : ca) sum_a += comb2(n);
  for (const auto& [key, n] : cb) sum_b += comb2(n);
  const double total = comb2(static_cast<std::int64_t>(a.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_joint - expected) / (max_index - expected);
}

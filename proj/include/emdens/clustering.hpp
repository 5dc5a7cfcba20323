#pragma once

#include "emdens/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace emdens {

struct KMeansOptions {
  int max_iters = 300;
  int restarts = 5;
  std::uint64_t seed = 0;
};

struct ClusterResult {
  std::vector<int> labels;  // N entries in [0, k)
  Matrix centroids;         // k x dim
  double total_ssd = 0.0;
  int iterations = 0;       // of the winning restart
  std::uint64_t seed = 0;
};

// Lloyd's algorithm with k-means++ seeding; best of `restarts` by SSD.
// Empty clusters are repaired by moving in the point farthest from its centroid.
ClusterResult kmeans(const Matrix& points, int k, const KMeansOptions& opts = {});

struct SilhouetteStats {
  double median = 0.0;
  double mad = 0.0;
  double mean = 0.0;
  double stderr_mean = 0.0;
  int sample_size = 0;
};

// Silhouette over a random subsample (exact when subsample >= N).
// Singleton clusters score s = 1 (a taken as 0).
SilhouetteStats silhouette(const Matrix& points, const std::vector<int>& labels,
                           int subsample_size = 10000, std::uint64_t seed = 0);

struct SsdCurve {
  std::vector<int> k_values;      // 1..k_max
  std::vector<double> scaled_ssd; // divided by the curve maximum
  std::vector<double> raw_ssd;
  int subsample_size = 0;
  std::uint64_t seed = 0;
};

SsdCurve ssd_sweep(const Matrix& points, int k_max = 30, int subsample_size = 50000,
                   std::uint64_t seed = 0, const KMeansOptions& base = {});

enum class InflectionMode { Exact, Tolerance };

// Smallest interior k where the second difference of the scaled curve hits
// zero (exact: sign change or exact zero) or falls within `tolerance`.
std::optional<int> inflection_k(const SsdCurve& curve, double tolerance = 0.005,
                                InflectionMode mode = InflectionMode::Tolerance);

void export_ssd_curve_csv(const SsdCurve& curve, const std::string& path);

}  // namespace emdens

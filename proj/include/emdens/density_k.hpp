#pragma once

#include "emdens/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace emdens {

/// B^3 bin counts over the unit cube of the embedding.
struct DensityHistogram {
  int bins_per_dim = 10;
  std::vector<std::int64_t> counts;  // flat, index = (i*B + j)*B + k

  std::int64_t total() const;
  std::int64_t& at(int i, int j, int k);
  std::int64_t at(int i, int j, int k) const;
};

struct KEstimate {
  int k = 0;
  bool homogeneous = false;
  double q1 = 0.0;
  double q3 = 0.0;
  double threshold = 0.0;        // Q3 + 1.5 * IQR; counts must exceed it strictly
  double percentile_cut = 0.0;   // floor applied to the outlier bins' counts
  std::vector<std::pair<std::array<int, 3>, std::int64_t>> outlier_bins;  // retained
};

// Right-closed last bin: index = min(floor(z*B), B-1) per dimension.
std::array<int, 3> bin_index(const Eigen::Vector3d& z, int bins_per_dim);

DensityHistogram histogram(const Matrix& embedding, int bins_per_dim = 10);

// Linear-interpolation (type-7) quantile of a sample; q in [0,1].
double quantile_type7(std::vector<double> values, double q);

// IQR outlier rule over all bin counts (zeros included), then the
// percentile floor over the outlier bins' own counts.
KEstimate estimate_k(const DensityHistogram& hist, double percentile_floor = 20.0);

struct DensityDiagnostics {
  double empty_bin_fraction = 0.0;
  std::int64_t max_count = 0;
  double median_count = 0.0;
  double max_over_median = 0.0;  // inf-like sentinel when median is 0: reported as max
  double skewness = 0.0;
};

DensityDiagnostics dense_region_check(const DensityHistogram& hist);

void export_histogram_csv(const DensityHistogram& hist, const std::string& path);
void export_k_estimate_json(const KEstimate& est, const std::string& path);

}  // namespace emdens

#include "emdens/density_k.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace emdens {

using json = nlohmann::json;

std::int64_t DensityHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t& DensityHistogram::at(int i, int j, int k) {
  return counts[(static_cast<std::size_t>(i) * bins_per_dim + j) * bins_per_dim + k];
}

std::int64_t DensityHistogram::at(int i, int j, int k) const {
  return counts[(static_cast<std::size_t>(i) * bins_per_dim + j) * bins_per_dim + k];
}

std::array<int, 3> bin_index(const Eigen::Vector3d& z, int bins_per_dim) {
  std::array<int, 3> idx{};
  for (int d = 0; d < 3; ++d) {
    if (!(z[d] >= 0.0 && z[d] <= 1.0))
      throw DataError("embedding coordinate " + std::to_string(z[d]) +
                      " outside [0,1] in dimension " + std::to_string(d));
    idx[d] = std::min(static_cast<int>(z[d] * bins_per_dim), bins_per_dim - 1);
  }
  return idx;
}

DensityHistogram histogram(const Matrix& embedding, int bins_per_dim) {
  if (embedding.cols() != 3) throw DataError("embedding must have 3 columns");
  if (bins_per_dim < 1) throw DataError("bins_per_dim must be >= 1");
  DensityHistogram h;
  h.bins_per_dim = bins_per_dim;
  h.counts.assign(static_cast<std::size_t>(bins_per_dim) * bins_per_dim * bins_per_dim, 0);
  for (Eigen::Index r = 0; r < embedding.rows(); ++r) {
    const auto idx = bin_index(embedding.row(r).transpose(), bins_per_dim);
    ++h.at(idx[0], idx[1], idx[2]);
  }
  return h;
}

double quantile_type7(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - std::floor(h)) * (values[hi] - values[lo]);
}

KEstimate estimate_k(const DensityHistogram& hist, double percentile_floor) {
  if (hist.counts.empty()) throw DataError("empty histogram");
  if (percentile_floor < 0 || percentile_floor > 100)
    throw DataError("percentile_floor must be in [0,100]");

  std::vector<double> all(hist.counts.begin(), hist.counts.end());
  KEstimate est;
  est.q1 = quantile_type7(all, 0.25);
  est.q3 = quantile_type7(all, 0.75);
  est.threshold = est.q3 + 1.5 * (est.q3 - est.q1);

  const int b = hist.bins_per_dim;
  std::vector<std::pair<std::array<int, 3>, std::int64_t>> outliers;
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j)
      for (int k = 0; k < b; ++k) {
        const std::int64_t c = hist.at(i, j, k);
        if (static_cast<double>(c) > est.threshold)
          outliers.push_back({{i, j, k}, c});
      }

  if (outliers.empty()) {
    est.homogeneous = true;
    est.k = 0;
    return est;
  }

  std::vector<double> outlier_counts;
  outlier_counts.reserve(outliers.size());
  for (const auto& o : outliers) outlier_counts.push_back(static_cast<double>(o.second));
  est.percentile_cut = quantile_type7(outlier_counts, percentile_floor / 100.0);
  for (const auto& o : outliers)
    if (static_cast<double>(o.second) >= est.percentile_cut) est.outlier_bins.push_back(o);
  est.k = static_cast<int>(est.outlier_bins.size());
  return est;
}

DensityDiagnostics dense_region_check(const DensityHistogram& hist) {
  if (hist.counts.empty()) throw DataError("empty histogram");
  DensityDiagnostics d;
  const double n = static_cast<double>(hist.counts.size());
  std::int64_t zeros = 0;
  for (auto c : hist.counts) {
    if (c == 0) ++zeros;
    d.max_count = std::max(d.max_count, c);
  }
  d.empty_bin_fraction = static_cast<double>(zeros) / n;
  std::vector<double> all(hist.counts.begin(), hist.counts.end());
  d.median_count = quantile_type7(all, 0.5);
  d.max_over_median = d.median_count > 0
                          ? static_cast<double>(d.max_count) / d.median_count
                          : static_cast<double>(d.max_count);
  const double mean = std::accumulate(all.begin(), all.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0;
  for (double c : all) {
    const double x = c - mean;
    m2 += x * x;
    m3 += x * x * x;
  }
  m2 /= n;
  m3 /= n;
  d.skewness = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
  return d;
}

void export_histogram_csv(const DensityHistogram& hist, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "i,j,k,count\n";
  const int b = hist.bins_per_dim;
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j)
      for (int k = 0; k < b; ++k)
        out << i << ',' << j << ',' << k << ',' << hist.at(i, j, k) << '\n';
}

void export_k_estimate_json(const KEstimate& est, const std::string& path) {
  json j;
  j["k"] = est.k;
  j["homogeneous"] = est.homogeneous;
  j["q1"] = est.q1;
  j["q3"] = est.q3;
  j["threshold"] = est.threshold;
  j["percentile_cut"] = est.percentile_cut;
  json bins = json::array();
  for (const auto& o : est.outlier_bins)
    bins.push_back({{"i", o.first[0]}, {"j", o.first[1]}, {"k", o.first[2]},
                    {"count", o.second}});
  j["outlier_bins"] = bins;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace emdens

#include "emdens/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace emdens {

using ordered_json = nlohmann::ordered_json;

std::vector<std::uint8_t> pseudo_rgb(const Matrix& embedding, int height, int width) {
  if (embedding.cols() != 3) throw DataError("embedding must have 3 columns");
  if (embedding.rows() != static_cast<Eigen::Index>(height) * width)
    throw DataError("embedding rows do not match height*width");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(height) * width * 3);
  for (Eigen::Index r = 0; r < embedding.rows(); ++r)
    for (int c = 0; c < 3; ++c) {
      const double z = embedding(r, c);
      if (!(z >= 0.0 && z <= 1.0))
        throw DataError("embedding value outside [0,1]");
      out[static_cast<std::size_t>(r) * 3 + c] =
          static_cast<std::uint8_t>(std::floor(z * 255.0 + 0.5));
    }
  return out;
}

std::vector<std::array<std::uint8_t, 3>> make_palette(int k) {
  std::vector<std::array<std::uint8_t, 3>> palette(k);
  for (int c = 0; c < k; ++c) {
    const double h = 360.0 * c / k;  // S = V = 1
    const double hp = h / 60.0;
    const double x = 1.0 - std::abs(std::fmod(hp, 2.0) - 1.0);
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp)) {
      case 0: r = 1; g = x; break;
      case 1: r = x; g = 1; break;
      case 2: g = 1; b = x; break;
      case 3: g = x; b = 1; break;
      case 4: r = x; b = 1; break;
      default: r = 1; b = x; break;
    }
    palette[c] = {static_cast<std::uint8_t>(std::floor(r * 255.0 + 0.5)),
                  static_cast<std::uint8_t>(std::floor(g * 255.0 + 0.5)),
                  static_cast<std::uint8_t>(std::floor(b * 255.0 + 0.5))};
  }
  return palette;
}

ClusterMapImages cluster_map(const std::vector<int>& labels, int k, int height, int width) {
  if (static_cast<std::int64_t>(labels.size()) != static_cast<std::int64_t>(height) * width)
    throw DataError("labels length does not match height*width");
  if (k < 1) throw DataError("k must be >= 1");
  if (k > 255) throw DataError("label PGM export requires k <= 255");
  const auto palette = make_palette(k);
  ClusterMapImages out;
  out.rgb.resize(labels.size() * 3);
  out.labels.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 0 || l >= k) throw DataError("label out of range at pixel " + std::to_string(i));
    out.labels[i] = static_cast<std::uint8_t>(l);
    out.rgb[i * 3 + 0] = palette[l][0];
    out.rgb[i * 3 + 1] = palette[l][1];
    out.rgb[i * 3 + 2] = palette[l][2];
  }
  return out;
}

CorrelationMatrix correlate_maps(const std::vector<int>& labels, int k,
                                 const MultiplexImage& img, double threshold) {
  const Eigen::Index n = img.data.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw DataError("labels length does not match image pixel count");
  CorrelationMatrix cm;
  cm.values = Matrix::Zero(k, img.channels);
  cm.defined.assign(k, std::vector<bool>(img.channels, false));

  for (int c = 0; c < k; ++c) {
    // phi coefficient from the 2x2 contingency table
    std::int64_t n_cluster = 0;
    for (auto l : labels) n_cluster += l == c;
    if (n_cluster == 0 || n_cluster == n) continue;  // constant mask
    for (int ch = 0; ch < img.channels; ++ch) {
      std::int64_t n11 = 0, n_feature = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const bool f = img.data(i, ch) > threshold;
        n_feature += f;
        n11 += f && labels[i] == c;
      }
      if (n_feature == 0 || n_feature == n) continue;
      const double a = static_cast<double>(n11);
      const double b = static_cast<double>(n_cluster - n11);
      const double cc = static_cast<double>(n_feature - n11);
      const double d = static_cast<double>(n - n_cluster - n_feature + n11);
      const double denom = std::sqrt((a + b) * (cc + d) * (a + cc) * (b + d));
      cm.values(c, ch) = (a * d - b * cc) / denom;
      cm.defined[c][ch] = true;
    }
  }
  return cm;
}

namespace {

ordered_json timings_json(const StageTimings& t) {
  ordered_json j;
  j["training_s"] = t.training_s;
  j["embedding_s"] = t.embedding_s;
  j["density_estimation_s"] = t.density_s;
  j["outlier_detection_s"] = t.outlier_s;
  j["clustering_s"] = t.clustering_s;
  j["total_s"] = t.total_s;
  return j;
}

}  // namespace

void write_summary_report(const SummaryReport& report, const std::string& json_path) {
  if (report.n_pixels <= 0 || report.channels <= 0)
    throw DataError("summary report requires a completed pipeline");

  ordered_json j;
  j["dataset"] = report.dataset;
  j["n_pixels"] = report.n_pixels;
  j["channels"] = report.channels;
  j["k"] = report.k_estimate.k;
  j["homogeneous"] = report.k_estimate.homogeneous;
  j["quartiles"] = {{"q1", report.k_estimate.q1}, {"q3", report.k_estimate.q3}};
  j["outlier_threshold"] = report.k_estimate.threshold;
  j["percentile_cut"] = report.k_estimate.percentile_cut;
  ordered_json bins = ordered_json::array();
  for (const auto& o : report.k_estimate.outlier_bins)
    bins.push_back({{"i", o.first[0]}, {"j", o.first[1]}, {"k", o.first[2]},
                    {"count", o.second}});
  j["outlier_bins"] = bins;
  j["diagnostics"] = {{"empty_bin_fraction", report.diagnostics.empty_bin_fraction},
                      {"max_count", report.diagnostics.max_count},
                      {"median_count", report.diagnostics.median_count},
                      {"max_over_median", report.diagnostics.max_over_median},
                      {"skewness", report.diagnostics.skewness}};
  if (report.silhouette) {
    j["silhouette"] = {{"median", report.silhouette->median},
                       {"mad", report.silhouette->mad},
                       {"mean", report.silhouette->mean},
                       {"stderr", report.silhouette->stderr_mean},
                       {"sample_size", report.silhouette->sample_size}};
  }
  j["timings"] = timings_json(report.timings);

  std::ofstream out(json_path);
  if (!out) throw DataError("cannot write " + json_path);
  out << j.dump(2) << "\n";

  if (report.ssd_curve) {
    std::string csv = json_path;
    const auto dot = csv.rfind('.');
    csv = (dot == std::string::npos ? csv : csv.substr(0, dot)) + "_ssd.csv";
    export_ssd_curve_csv(*report.ssd_curve, csv);
  }
}

}  // namespace emdens

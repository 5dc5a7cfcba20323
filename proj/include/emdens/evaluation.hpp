#pragma once

#include "emdens/clustering.hpp"
#include "emdens/density_k.hpp"
#include "emdens/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace emdens {

// round-half-up byte quantization of the latent coordinates
std::vector<std::uint8_t> pseudo_rgb(const Matrix& embedding, int height, int width);

struct ClusterMapImages {
  std::vector<std::uint8_t> rgb;     // H*W*3
  std::vector<std::uint8_t> labels;  // H*W raw label ids (k <= 255)
};

// Deterministic palette: evenly spaced hues, full saturation and value.
std::vector<std::array<std::uint8_t, 3>> make_palette(int k);

ClusterMapImages cluster_map(const std::vector<int>& labels, int k, int height, int width);

/// Phi coefficient of [label == c] against [channel > threshold], per
/// cluster and channel. Constant vectors leave the entry undefined.
struct CorrelationMatrix {
  Matrix values;  // k x D
  std::vector<std::vector<bool>> defined;
};

CorrelationMatrix correlate_maps(const std::vector<int>& labels, int k,
                                 const MultiplexImage& img, double threshold = 0.0);

struct StageTimings {
  double training_s = 0.0;  // reported separately; excluded from the density path
  double embedding_s = 0.0;
  double density_s = 0.0;
  double outlier_s = 0.0;
  double clustering_s = 0.0;
  double total_s = 0.0;
};

struct SummaryReport {
  std::string dataset;
  std::int64_t n_pixels = 0;
  int channels = 0;
  KEstimate k_estimate;
  DensityDiagnostics diagnostics;
  std::optional<SilhouetteStats> silhouette;
  std::optional<SsdCurve> ssd_curve;
  StageTimings timings;
};

// JSON report with stable key order plus CSV exports next to it.
void write_summary_report(const SummaryReport& report, const std::string& json_path);

}  // namespace emdens

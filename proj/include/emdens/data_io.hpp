#pragma once

#include "emdens/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace emdens {

enum class MatrixFormat { Csv, RawF32 };

/// Synthetic ground-truth generator: G isotropic Gaussian blobs in D dims.
struct BlobSpec {
  int n_clusters = 4;
  int points_per_cluster = 1000;
  int channels = 8;
  double mean_separation = 6.0;  // minimum pairwise mean distance, units of noise_sigma
  double noise_sigma = 1.0;
  // Width of the mean-sampling box, as a multiple of the minimum separation
  // (before the cluster-count correction applied in synth_blobs).
  double box_factor = 500.0 / 6.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Loads `<stem>.csv` or `<stem>.f32` together with its `<stem>.meta` header.
MultiplexImage load_matrix(const std::string& path, MatrixFormat format);
void save_matrix(const MultiplexImage& img, const std::string& path, MatrixFormat format);

std::pair<MultiplexImage, NormalizationSpec> normalize(const MultiplexImage& img);

// Maps data into [0,1] with a stored spec; values outside the recorded
// training range are clamped so transferred models see a fixed domain.
Matrix apply_normalization(const NormalizationSpec& spec, const Matrix& data);
Matrix undo_normalization(const NormalizationSpec& spec, const Matrix& data01);

std::pair<MultiplexImage, std::vector<int>> synth_blobs(const BlobSpec& spec);

// Binary netpbm writers, bit-exact: "P6\n<w> <h>\n255\n" + row-major bytes.
void write_ppm(const std::vector<std::uint8_t>& rgb, int height, int width,
               const std::string& path);
void write_pgm(const std::vector<std::uint8_t>& gray, int height, int width,
               const std::string& path);

}  // namespace emdens

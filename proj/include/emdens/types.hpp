#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace emdens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// N x 3 latent coordinates, every entry in [0,1].
using Embedding = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// Thrown for malformed or inconsistent input data (maps to CLI exit 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when optimization diverges or produces non-finite values (CLI exit 4).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A multiplex image: one row of `data` per pixel, one column per channel.
struct MultiplexImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  Matrix data;  // (height*width) x channels, non-negative intensities
  std::vector<std::string> channel_names;

  int pixels() const { return height * width; }
  void validate() const;
};

/// Per-channel min/max recorded at training time so unseen data can be
/// mapped into the same [0,1] domain.
struct NormalizationSpec {
  Vector min;
  Vector max;
  std::vector<bool> constant;  // channels with min == max (mapped to 0)

  int channels() const { return static_cast<int>(min.size()); }
};

}  // namespace emdens

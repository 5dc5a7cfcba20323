#include "emdens/data_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace emdens {

namespace fs = std::filesystem;
using json = nlohmann::json;

void MultiplexImage::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0)
    throw DataError("image dimensions must be positive");
  if (data.rows() != static_cast<Eigen::Index>(pixels()) || data.cols() != channels) {
    std::ostringstream os;
    os << "data is " << data.rows() << "x" << data.cols() << " but header declares "
       << height << "x" << width << " pixels with " << channels << " channels";
    throw DataError(os.str());
  }
  for (Eigen::Index r = 0; r < data.rows(); ++r)
    for (Eigen::Index c = 0; c < data.cols(); ++c)
      if (!std::isfinite(data(r, c))) {
        std::ostringstream os;
        os << "non-finite value at row " << r << ", column " << c;
        throw DataError(os.str());
      }
  if (!channel_names.empty() && static_cast<int>(channel_names.size()) != channels)
    throw DataError("channel_names length does not match channel count");
}

void BlobSpec::validate() const {
  if (n_clusters < 1) throw DataError("n_clusters must be >= 1");
  if (points_per_cluster < 1) throw DataError("points_per_cluster must be >= 1");
  if (channels < 1) throw DataError("channels must be >= 1");
  if (!(mean_separation > 0)) throw DataError("mean_separation must be > 0");
  if (!(noise_sigma > 0)) throw DataError("noise_sigma must be > 0");
  if (!(box_factor > 0)) throw DataError("box_factor must be > 0");
}

namespace {

std::string meta_path_for(const std::string& path) {
  fs::path p(path);
  p.replace_extension(".meta");
  return p.string();
}

struct Header {
  int height, width, channels;
  std::vector<std::string> channel_names;
};

Header read_header(const std::string& data_path) {
  const std::string mp = meta_path_for(data_path);
  std::ifstream in(mp);
  if (!in) throw DataError("cannot open header file: " + mp);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed header " + mp + ": " + e.what());
  }
  Header h;
  try {
    h.height = j.at("height").get<int>();
    h.width = j.at("width").get<int>();
    h.channels = j.at("channels").get<int>();
    if (j.contains("channel_names"))
      h.channel_names = j["channel_names"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError("header " + mp + " missing required key: " + e.what());
  }
  return h;
}

void write_header(const MultiplexImage& img, const std::string& data_path) {
  json j;
  j["height"] = img.height;
  j["width"] = img.width;
  j["channels"] = img.channels;
  if (!img.channel_names.empty()) j["channel_names"] = img.channel_names;
  std::ofstream out(meta_path_for(data_path));
  if (!out) throw DataError("cannot write header for " + data_path);
  out << j.dump(2) << "\n";
}

Matrix load_csv(const std::string& path, int rows, int cols) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  Matrix m(rows, cols);
  std::string line;
  int r = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (r >= rows) throw DataError("too many rows in " + path);
    std::stringstream ss(line);
    std::string cell;
    int c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= cols) throw DataError("too many columns at row " + std::to_string(r));
      try {
        m(r, c) = std::stod(cell);
      } catch (const std::exception&) {
        throw DataError("unparseable value at row " + std::to_string(r) + ", column " +
                        std::to_string(c) + ": '" + cell + "'");
      }
      ++c;
    }
    if (c != cols)
      throw DataError("row " + std::to_string(r) + " has " + std::to_string(c) +
                      " columns, expected " + std::to_string(cols));
    ++r;
  }
  if (r != rows)
    throw DataError("file has " + std::to_string(r) + " rows but header declares " +
                    std::to_string(rows));
  return m;
}

Matrix load_raw_f32(const std::string& path, int rows, int cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
    throw DataError("raw file " + path + " is shorter than header declares");
  char extra;
  if (in.read(&extra, 1))
    throw DataError("raw file " + path + " is longer than header declares");
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      m(r, c) = static_cast<double>(buf[static_cast<std::size_t>(r) * cols + c]);
  return m;
}

}  // namespace

MultiplexImage load_matrix(const std::string& path, MatrixFormat format) {
  const Header h = read_header(path);
  const int n = h.height * h.width;
  MultiplexImage img;
  img.height = h.height;
  img.width = h.width;
  img.channels = h.channels;
  img.channel_names = h.channel_names;
  img.data = format == MatrixFormat::Csv ? load_csv(path, n, h.channels)
                                         : load_raw_f32(path, n, h.channels);
  img.validate();
  return img;
}

void save_matrix(const MultiplexImage& img, const std::string& path, MatrixFormat format) {
  img.validate();
  write_header(img, path);
  if (format == MatrixFormat::Csv) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out.precision(17);
    for (Eigen::Index r = 0; r < img.data.rows(); ++r) {
      for (Eigen::Index c = 0; c < img.data.cols(); ++c) {
        if (c) out << ',';
        out << img.data(r, c);
      }
      out << '\n';
    }
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    std::vector<float> buf(static_cast<std::size_t>(img.data.rows()) * img.data.cols());
    for (Eigen::Index r = 0; r < img.data.rows(); ++r)
      for (Eigen::Index c = 0; c < img.data.cols(); ++c)
        buf[static_cast<std::size_t>(r) * img.data.cols() + c] =
            static_cast<float>(img.data(r, c));
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

std::pair<MultiplexImage, NormalizationSpec> normalize(const MultiplexImage& img) {
  img.validate();
  NormalizationSpec spec;
  spec.min = img.data.colwise().minCoeff();
  spec.max = img.data.colwise().maxCoeff();
  spec.constant.resize(img.channels);
  for (int c = 0; c < img.channels; ++c) spec.constant[c] = spec.min[c] == spec.max[c];
  MultiplexImage out = img;
  out.data = apply_normalization(spec, img.data);
  return {std::move(out), std::move(spec)};
}

Matrix apply_normalization(const NormalizationSpec& spec, const Matrix& data) {
  if (data.cols() != spec.channels())
    throw DataError("channel count does not match normalization spec");
  Matrix out(data.rows(), data.cols());
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    if (spec.constant[c]) {
      out.col(c).setZero();
      continue;
    }
    const double range = spec.max[c] - spec.min[c];
    out.col(c) = ((data.col(c).array() - spec.min[c]) / range).cwiseMax(0.0).cwiseMin(1.0);
  }
  return out;
}

Matrix undo_normalization(const NormalizationSpec& spec, const Matrix& data01) {
  if (data01.cols() != spec.channels())
    throw DataError("channel count does not match normalization spec");
  Matrix out(data01.rows(), data01.cols());
  for (Eigen::Index c = 0; c < data01.cols(); ++c) {
    if (spec.constant[c])
      out.col(c).setConstant(spec.min[c]);
    else
      out.col(c) = data01.col(c).array() * (spec.max[c] - spec.min[c]) + spec.min[c];
  }
  return out;
}

std::pair<MultiplexImage, std::vector<int>> synth_blobs(const BlobSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int g = spec.n_clusters;
  const int d = spec.channels;
  const double min_dist = spec.mean_separation * spec.noise_sigma;

  // Means are drawn in a box wide enough that the per-channel spread of the
  // means dominates the within-cluster noise, as in real multiplex data where
  // phenotype peaks are sharp relative to the marker dynamic range.  The
  // (g+1)/(g-1) factor keeps the expected per-channel range of the means
  // roughly constant in the cluster count; the box grows on retry exhaustion.
  Matrix means(g, d);
  double box = min_dist * spec.box_factor * (g + 1) / std::max(g - 1, 1);
  const double lo = 4.0 * spec.noise_sigma;  // keep blobs away from the >=0 clip
  bool placed = false;
  for (int attempt = 0; attempt < 50 && !placed; ++attempt, box *= 1.5) {
    std::uniform_real_distribution<double> uni(lo, lo + box);
    placed = true;
    for (int i = 0; i < g; ++i) {
      bool ok = false;
      for (int retry = 0; retry < 1000 && !ok; ++retry) {
        for (int c = 0; c < d; ++c) means(i, c) = uni(rng);
        ok = true;
        for (int j = 0; j < i; ++j)
          if ((means.row(i) - means.row(j)).norm() < min_dist) {
            ok = false;
            break;
          }
      }
      if (!ok) {
        placed = false;
        break;
      }
    }
  }
  if (!placed)
    throw DataError("could not place cluster means with required separation");

  const int n = g * spec.points_per_cluster;
  MultiplexImage img;
  img.channels = d;
  img.width = spec.points_per_cluster;
  img.height = g;
  img.data.resize(n, d);
  std::vector<int> labels(n);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  int row = 0;
  for (int i = 0; i < g; ++i)
    for (int p = 0; p < spec.points_per_cluster; ++p, ++row) {
      for (int c = 0; c < d; ++c)
        img.data(row, c) = std::max(0.0, means(i, c) + noise(rng));
      labels[row] = i;
    }
  img.validate();
  return {std::move(img), std::move(labels)};
}

namespace {
void write_pnm(const std::vector<std::uint8_t>& bytes, int height, int width,
               int samples, const char* magic, const std::string& path) {
  if (height <= 0 || width <= 0) throw DataError("image dimensions must be positive");
  const std::size_t expect = static_cast<std::size_t>(height) * width * samples;
  if (bytes.size() != expect)
    throw DataError("pixel buffer size " + std::to_string(bytes.size()) +
                    " does not match " + std::to_string(expect));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << magic << "\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}
}  // namespace

void write_ppm(const std::vector<std::uint8_t>& rgb, int height, int width,
               const std::string& path) {
  write_pnm(rgb, height, width, 3, "P6", path);
}

void write_pgm(const std::vector<std::uint8_t>& gray, int height, int width,
               const std::string& path) {
  write_pnm(gray, height, width, 1, "P5", path);
}

}  // namespace emdens

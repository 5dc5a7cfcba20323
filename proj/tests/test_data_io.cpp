#include "emdens/data_io.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace emdens;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("emdens_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// independent P6/P5 reader used as the round-trip oracle
std::vector<std::uint8_t> read_pnm(const std::string& path, std::string expect_magic,
                                   int& w, int& h) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::string magic;
  int maxval;
  in >> magic >> w >> h >> maxval;
  REQUIRE(magic == expect_magic);
  REQUIRE(maxval == 255);
  in.get();  // single whitespace after maxval
  const int samples = magic == "P6" ? 3 : 1;
  std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * samples);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  REQUIRE(in.gcount() == static_cast<std::streamsize>(data.size()));
  return data;
}

}  // namespace

TEST_CASE("raw f32 round trip preserves a small image") {
  TempDir tmp;
  MultiplexImage img;
  img.height = 2;
  img.width = 2;
  img.channels = 3;
  img.data.resize(4, 3);
  img.data << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11;
  save_matrix(img, tmp.file("a.f32"), MatrixFormat::RawF32);
  MultiplexImage back = load_matrix(tmp.file("a.f32"), MatrixFormat::RawF32);
  CHECK(back.pixels() == 4);
  CHECK(back.channels == 3);
  CHECK(back.data.isApprox(img.data));
}

TEST_CASE("csv loader rejects dimension mismatch") {
  TempDir tmp;
  std::ofstream(tmp.file("b.meta")) << R"({"height":2,"width":2,"channels":2})";
  std::ofstream(tmp.file("b.csv")) << "1,2\n3,4\n5,6\n";
  CHECK_THROWS_AS(load_matrix(tmp.file("b.csv"), MatrixFormat::Csv), DataError);
}

TEST_CASE("loader reports the cell holding a non-finite value") {
  TempDir tmp;
  std::ofstream(tmp.file("c.meta")) << R"({"height":1,"width":2,"channels":2})";
  std::ofstream(tmp.file("c.csv")) << "1,2\n3,NaN\n";
  try {
    load_matrix(tmp.file("c.csv"), MatrixFormat::Csv);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    CHECK(std::string(e.what()).find("column 1") != std::string::npos);
  }
}

TEST_CASE("normalize maps channels onto [0,1] endpoints") {
  MultiplexImage img;
  img.height = 3;
  img.width = 1;
  img.channels = 2;
  img.data.resize(3, 2);
  img.data << 0, 7, 5, 7, 10, 7;
  auto [norm, spec] = normalize(img);
  CHECK(norm.data(0, 0) == doctest::Approx(0.0));
  CHECK(norm.data(1, 0) == doctest::Approx(0.5));
  CHECK(norm.data(2, 0) == doctest::Approx(1.0));
  // constant channel maps to zero and is flagged
  CHECK(norm.data.col(1).isZero());
  CHECK(spec.constant[1]);
  CHECK_FALSE(spec.constant[0]);
}

TEST_CASE("stored spec clamps unseen values into [0,1]") {
  NormalizationSpec spec;
  spec.min = Vector::Constant(1, 0.0);
  spec.max = Vector::Constant(1, 10.0);
  spec.constant = {false};
  Matrix unseen(2, 1);
  unseen << 15.0, -3.0;
  Matrix mapped = apply_normalization(spec, unseen);
  CHECK(mapped(0, 0) == 1.0);
  CHECK(mapped(1, 0) == 0.0);
}

TEST_CASE("normalize then denormalize reproduces the data") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(3.0, 90.0);
  MultiplexImage img;
  img.height = 20;
  img.width = 5;
  img.channels = 4;
  img.data.resize(100, 4);
  for (Eigen::Index r = 0; r < 100; ++r)
    for (Eigen::Index c = 0; c < 4; ++c) img.data(r, c) = uni(rng);
  auto [norm, spec] = normalize(img);
  Matrix back = undo_normalization(spec, norm.data);
  CHECK(((back - img.data).cwiseAbs().array() / img.data.array().abs()).maxCoeff() < 1e-6);
}

TEST_CASE("synth_blobs is deterministic and balanced") {
  BlobSpec spec;
  spec.n_clusters = 3;
  spec.points_per_cluster = 50;
  spec.channels = 5;
  spec.seed = 42;
  auto [a, la] = synth_blobs(spec);
  auto [b, lb] = synth_blobs(spec);
  CHECK(a.data == b.data);
  CHECK(la == lb);
  std::vector<int> counts(3, 0);
  for (int l : la) ++counts[l];
  for (int c : counts) CHECK(c == 50);
  CHECK(a.data.minCoeff() >= 0.0);
}

TEST_CASE("synth_blobs single cluster labels everything 0") {
  BlobSpec spec;
  spec.n_clusters = 1;
  spec.points_per_cluster = 10;
  spec.channels = 2;
  auto [img, labels] = synth_blobs(spec);
  CHECK(std::set<int>(labels.begin(), labels.end()) == std::set<int>{0});
}

TEST_CASE("blob means respect the separation constraint") {
  BlobSpec spec;
  spec.n_clusters = 6;
  spec.points_per_cluster = 200;
  spec.channels = 4;
  spec.mean_separation = 8.0;
  spec.noise_sigma = 0.5;
  spec.seed = 3;
  auto [img, labels] = synth_blobs(spec);
  // empirical means of well-populated clusters stay >~ the required distance apart
  Matrix means = Matrix::Zero(6, 4);
  for (int i = 0; i < img.data.rows(); ++i) means.row(labels[i]) += img.data.row(i);
  means /= 200.0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < i; ++j)
      CHECK((means.row(i) - means.row(j)).norm() >
            0.9 * spec.mean_separation * spec.noise_sigma);
}

TEST_CASE("ppm bytes are exactly the P6 header plus payload") {
  TempDir tmp;
  write_ppm({0xFF, 0xFF, 0xFF}, 1, 1, tmp.file("w.ppm"));
  CHECK(slurp(tmp.file("w.ppm")) == std::string("P6\n1 1\n255\n\xFF\xFF\xFF", 14));
  write_pgm({0x00, 0x00}, 1, 2, tmp.file("b.pgm"));
  CHECK(slurp(tmp.file("b.pgm")) == std::string("P5\n2 1\n255\n\x00\x00", 13));
}

TEST_CASE("ppm round-trips through an independent reader") {
  TempDir tmp;
  std::vector<std::uint8_t> rgb(5 * 4 * 3);
  std::mt19937_64 rng(11);
  for (auto& v : rgb) v = static_cast<std::uint8_t>(rng() & 0xFF);
  write_ppm(rgb, 4, 5, tmp.file("r.ppm"));
  int w, h;
  CHECK(read_pnm(tmp.file("r.ppm"), "P6", w, h) == rgb);
  CHECK(w == 5);
  CHECK(h == 4);
}

TEST_CASE("pnm writers reject wrong buffer sizes") {
  TempDir tmp;
  CHECK_THROWS_AS(write_ppm({1, 2, 3}, 2, 1, tmp.file("x.ppm")), DataError);
}

#include "emdens/evaluation.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace emdens;
namespace fs = std::filesystem;

TEST_CASE("pseudo rgb endpoints and rounding") {
  Matrix z(3, 3);
  z << 0, 0, 0, 1, 1, 1, 0.5, 0.5, 0.5;
  auto bytes = pseudo_rgb(z, 3, 1);
  CHECK(bytes[0] == 0);
  CHECK(bytes[3] == 255);
  CHECK(bytes[6] == 128);  // round-half-up
}

TEST_CASE("pseudo rgb is monotone per channel") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> uni(0, 1);
  double prev = 0.0;
  Matrix z(64, 3);
  for (int i = 0; i < 64; ++i) {
    prev = std::min(1.0, prev + uni(rng) / 64.0);
    z(i, 0) = prev;
    z(i, 1) = 0.0;
    z(i, 2) = 0.0;
  }
  auto bytes = pseudo_rgb(z, 8, 8);
  for (int i = 1; i < 64; ++i) CHECK(bytes[i * 3] >= bytes[(i - 1) * 3]);
}

TEST_CASE("pseudo rgb rejects dimension mismatch") {
  CHECK_THROWS_AS(pseudo_rgb(Matrix::Zero(3, 3), 2, 2), DataError);
}

TEST_CASE("cluster map checker pattern and label round-trip") {
  ClusterMapImages imgs = cluster_map({0, 1, 1, 0}, 2, 2, 2);
  CHECK(imgs.labels == std::vector<std::uint8_t>{0, 1, 1, 0});
  // checker: pixel 0 and 3 share a colour, 1 and 2 share the other
  for (int c = 0; c < 3; ++c) {
    CHECK(imgs.rgb[0 * 3 + c] == imgs.rgb[3 * 3 + c]);
    CHECK(imgs.rgb[1 * 3 + c] == imgs.rgb[2 * 3 + c]);
  }
  CHECK(imgs.rgb[0] != imgs.rgb[3 + 0]);

  ClusterMapImages uniform = cluster_map({0, 0, 0, 0}, 1, 2, 2);
  for (std::size_t i = 3; i < uniform.rgb.size(); i += 3)
    CHECK(uniform.rgb[i] == uniform.rgb[0]);
}

TEST_CASE("cluster map enforces the PGM label limit") {
  std::vector<int> labels(300);
  for (int i = 0; i < 300; ++i) labels[i] = i;
  CHECK_THROWS_AS(cluster_map(labels, 300, 15, 20), DataError);
}

TEST_CASE("palette colours are distinct for small k") {
  auto p = make_palette(12);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) CHECK(p[i] != p[j]);
}

namespace {
MultiplexImage image_from_column(const std::vector<double>& channel) {
  MultiplexImage img;
  img.height = static_cast<int>(channel.size());
  img.width = 1;
  img.channels = 1;
  img.data.resize(img.height, 1);
  for (int i = 0; i < img.height; ++i) img.data(i, 0) = channel[i];
  return img;
}
}  // namespace

TEST_CASE("phi correlation endpoints") {
  // cluster mask identical to the channel's nonzero mask
  MultiplexImage img = image_from_column({1, 1, 0, 0, 1, 0});
  std::vector<int> labels = {0, 0, 1, 1, 0, 1};
  CorrelationMatrix cm = correlate_maps(labels, 2, img);
  CHECK(cm.defined[0][0]);
  CHECK(cm.values(0, 0) == doctest::Approx(1.0));
  CHECK(cm.values(1, 0) == doctest::Approx(-1.0));  // exact complement
}

TEST_CASE("constant channel leaves correlation undefined") {
  MultiplexImage img = image_from_column({2, 3, 4, 5});
  CorrelationMatrix cm = correlate_maps({0, 0, 1, 1}, 2, img);
  CHECK_FALSE(cm.defined[0][0]);
  CHECK_FALSE(cm.defined[1][0]);
}

TEST_CASE("phi is symmetric in the two masks") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 40;
    std::vector<int> labels(n);
    MultiplexImage img = image_from_column(std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng() % 2);
      img.data(i, 0) = static_cast<double>(rng() % 2);
    }
    CorrelationMatrix ab = correlate_maps(labels, 2, img);
    // swap roles: treat the channel mask as the cluster labels
    std::vector<int> swapped(n);
    MultiplexImage img2 = image_from_column(std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
      swapped[i] = img.data(i, 0) > 0 ? 0 : 1;
      img2.data(i, 0) = labels[i] == 0 ? 1.0 : 0.0;
    }
    CorrelationMatrix ba = correlate_maps(swapped, 2, img2);
    if (ab.defined[0][0] && ba.defined[0][0])
      CHECK(ab.values(0, 0) == doctest::Approx(ba.values(0, 0)));
  }
}

TEST_CASE("summary report is deterministic and complete") {
  SummaryReport rep;
  rep.dataset = "unit";
  rep.n_pixels = 100;
  rep.channels = 4;
  rep.k_estimate.k = 3;
  rep.k_estimate.threshold = 2.5;
  rep.diagnostics.empty_bin_fraction = 0.9;
  rep.timings.embedding_s = 0.5;
  rep.timings.density_s = 0.01;
  rep.timings.outlier_s = 0.001;
  rep.timings.total_s = 0.511;

  const fs::path dir = fs::temp_directory_path() / "emdens_eval_test";
  fs::create_directories(dir);
  const std::string p1 = (dir / "r1.json").string(), p2 = (dir / "r2.json").string();
  write_summary_report(rep, p1);
  write_summary_report(rep, p2);
  std::ifstream a(p1), b(p2);
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  // every timing stage named in the schema is present
  for (const char* key : {"training_s", "embedding_s", "density_estimation_s",
                          "outlier_detection_s", "total_s"})
    CHECK(sa.find(key) != std::string::npos);
  fs::remove_all(dir);

  SummaryReport empty;
  CHECK_THROWS_AS(write_summary_report(empty, (dir / "x.json").string()), DataError);
}

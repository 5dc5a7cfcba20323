#include "emdens/autoencoder.hpp"
#include "emdens/data_io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace emdens;
namespace fs = std::filesystem;

namespace {

Matrix random01(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.05, 0.95);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uni(rng);
  return m;
}

Vector random_params(int in_dim, int hidden, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-0.8, 0.8);
  Vector v(2 * in_dim * hidden + in_dim + hidden);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = uni(rng);
  return v;
}

// central finite differences of the total cost
Vector fd_gradient(const Vector& params, const Matrix& x, int hidden,
                   const SparseAeHyper& hyper, double h = 1e-6) {
  Vector g(params.size()), scratch;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    Vector plus = params, minus = params;
    plus[i] += h;
    minus[i] -= h;
    const double fp = cost_and_gradient(plus, x, hidden, hyper, scratch).total;
    const double fm = cost_and_gradient(minus, x, hidden, hyper, scratch).total;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double max_rel_err(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("sigmoid fixed points and identities") {
  CHECK(sigmoid(0.0) == 0.5);
  for (double x : {-7.3, -1.0, 0.2, 4.9})
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(sigmoid(25.0) - (1.0 - 1.3888e-11)) < 1e-15);
}

TEST_CASE("l2 penalty matches the hand computation") {
  AeStage st;
  st.encoder.weights.resize(2, 2);
  st.encoder.weights << 1, 2, 3, 4;
  st.encoder.biases = Vector::Constant(2, 99.0);  // biases excluded
  st.decoder.weights = Matrix::Zero(2, 2);
  st.decoder.biases = Vector::Zero(2);
  CHECK(l2_penalty(st) == doctest::Approx(15.0));
  st.encoder.weights *= 3.0;
  CHECK(l2_penalty(st) == doctest::Approx(9.0 * 15.0));
}

TEST_CASE("kl sparsity closed-form values") {
  CHECK(kl_sparsity(0.5, Vector::Constant(2, 0.5)) == doctest::Approx(0.0));
  CHECK(kl_sparsity(0.5, Vector::Constant(1, 0.25)) == doctest::Approx(0.14384).epsilon(1e-4));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uni(0.01, 0.99);
  for (int i = 0; i < 50; ++i) {
    Vector gh(3);
    gh << uni(rng), uni(rng), uni(rng);
    CHECK(kl_sparsity(uni(rng), gh) >= 0.0);
  }
}

TEST_CASE("analytic gradient matches finite differences") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> dim(1, 5), rows(2, 10), reg(0, 2);
    const int in_dim = dim(rng), hidden = dim(rng), n = rows(rng);
    SparseAeHyper hyper;
    const double choices[] = {0.0, 0.1, 100.0};
    hyper.alpha = choices[reg(rng)];
    hyper.beta = choices[reg(rng)];
    hyper.gamma = 0.5;
    Matrix x = random01(n, in_dim, rng);
    Vector params = random_params(in_dim, hidden, rng);
    Vector grad;
    cost_and_gradient(params, x, hidden, hyper, grad);
    CHECK(max_rel_err(grad, fd_gradient(params, x, hidden, hyper)) < 1e-5);
  }
}

TEST_CASE("cost decomposes exactly into mse + alpha*l2 + beta*kl") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x = random01(6, 3, rng);
    Vector params = random_params(3, 2, rng);
    Vector grad;
    SparseAeHyper plain{.alpha = 0.0, .beta = 0.0};
    SparseAeHyper reg{.alpha = 1e-4, .beta = 100.0};
    const CostBreakdown base = cost_and_gradient(params, x, 2, plain, grad);
    const CostBreakdown full = cost_and_gradient(params, x, 2, reg, grad);
    CHECK(std::abs(full.total - base.total - reg.alpha * full.l2 - reg.beta * full.sparsity) <
          1e-12);
    CHECK(base.total == doctest::Approx(base.mse));
  }
}

TEST_CASE("stacked training is deterministic and reduces reconstruction error") {
  BlobSpec spec;
  spec.n_clusters = 4;
  spec.points_per_cluster = 100;
  spec.channels = 6;
  spec.seed = 9;
  auto [img, labels] = synth_blobs(spec);
  auto [norm, nspec] = normalize(img);

  std::vector<SparseAeHyper> hypers(2, SparseAeHyper{.alpha = 1e-4, .beta = 1.0,
                                                     .gamma = 0.5, .max_epochs = 80});
  TrainOptions opts{.seed = 1};
  DsaModel a = train_stacked(norm.data, {5, 3}, hypers, opts);
  DsaModel b = train_stacked(norm.data, {5, 3}, hypers, opts);
  CHECK(encode(a, norm.data) == encode(b, norm.data));

  // untrained model = fresh init, zero epochs
  std::vector<SparseAeHyper> zero = hypers;
  for (auto& h : zero) h.max_epochs = 1;
  TrainOptions quick{.seed = 1};
  quick.scg.max_iters = 1;
  const double trained_mse = reconstruction_mse(norm.data, decode(a, encode(a, norm.data)));
  DsaModel fresh = train_stacked(norm.data, {5, 3}, zero, quick);
  const double fresh_mse =
      reconstruction_mse(norm.data, decode(fresh, encode(fresh, norm.data)));
  CHECK(trained_mse < fresh_mse);
}

TEST_CASE("single-stage stack embeds to the requested width") {
  std::mt19937_64 rng(3);
  Matrix x = random01(40, 3, rng);
  std::vector<SparseAeHyper> hypers{{.alpha = 0.0, .beta = 0.0, .max_epochs = 20}};
  DsaModel m = train_stacked(x, {3}, hypers);
  Matrix z = encode(m, x);
  CHECK(z.cols() == 3);
  CHECK(z.minCoeff() > 0.0);
  CHECK(z.maxCoeff() < 1.0);
}

TEST_CASE("per-stage training cost history is non-increasing") {
  std::mt19937_64 rng(8);
  Matrix x = random01(60, 4, rng);
  std::vector<SparseAeHyper> hypers(2, SparseAeHyper{.beta = 0.5, .max_epochs = 60});
  TrainLog log;
  train_stacked(x, {4, 2}, hypers, {}, &log);
  REQUIRE(log.stage_costs.size() == 2);
  for (const auto& hist : log.stage_costs)
    for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] <= hist[i - 1]);
}

TEST_CASE("model save/load round-trips encode bit-exactly") {
  std::mt19937_64 rng(21);
  Matrix x = random01(30, 4, rng);
  std::vector<SparseAeHyper> hypers(2, SparseAeHyper{.max_epochs = 30});
  DsaModel m = train_stacked(x, {3, 2}, hypers);
  m.norm.min = Vector::Zero(4);
  m.norm.max = Vector::Constant(4, 1.0);
  m.norm.constant = {false, false, false, false};

  const std::string path = (fs::temp_directory_path() / "emdens_model_test.dsa").string();
  save_model(m, path);
  DsaModel loaded = load_model(path);
  CHECK(encode(loaded, x) == encode(m, x));

  // truncated file must not load
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 16);
  CHECK_THROWS_AS(load_model(path), DataError);
  fs::remove(path);
}

TEST_CASE("encode rejects a channel-count mismatch") {
  std::mt19937_64 rng(4);
  Matrix x = random01(20, 3, rng);
  std::vector<SparseAeHyper> hypers{{.max_epochs = 5}};
  DsaModel m = train_stacked(x, {2}, hypers);
  CHECK_THROWS_AS(encode(m, random01(5, 4, rng)), DataError);
  CHECK(reconstruction_mse(x, x) == 0.0);
}

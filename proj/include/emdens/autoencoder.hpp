#pragma once

#include "emdens/scg.hpp"
#include "emdens/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace emdens {

struct LayerParams {
  Matrix weights;  // out x in
  Vector biases;   // out
};

struct SparseAeHyper {
  double alpha = 1e-4;    // L2 weight-decay coefficient
  double beta = 100.0;    // sparsity coefficient
  double gamma = 0.5;     // target mean activation, in (0,1)
  int max_epochs = 10000; // SCG iteration cap

  void validate() const;
};

/// One autoencoder stage: in -> hidden (encoder), hidden -> in (decoder).
struct AeStage {
  LayerParams encoder;
  LayerParams decoder;

  int input_dim() const { return static_cast<int>(encoder.weights.cols()); }
  int hidden_dim() const { return static_cast<int>(encoder.weights.rows()); }
};

Matrix sigmoid(const Matrix& x);
double sigmoid(double x);

// Half the sum of squared weight entries, biases excluded.
double l2_penalty(const AeStage& stage);

// KL(gamma || gamma_hat_j) summed over hidden neurons; gamma_hat entries are
// clamped into [1e-10, 1 - 1e-10] before the logs.
double kl_sparsity(double gamma, const Vector& gamma_hat);

// Parameter packing order: encoder weights (column-major), encoder biases,
// decoder weights, decoder biases.
Vector pack_stage(const AeStage& stage);
AeStage unpack_stage(const Vector& params, int input_dim, int hidden_dim);

struct CostBreakdown {
  double total = 0.0;
  double mse = 0.0;
  double l2 = 0.0;       // unscaled (multiply by alpha)
  double sparsity = 0.0; // unscaled (multiply by beta)
};

/// Regularized reconstruction cost of a single stage with its analytic
/// gradient (backpropagation, including the mean-activation dependence of
/// the sparsity term). X rows are samples, values in [0,1].
CostBreakdown cost_and_gradient(const Vector& params, const Matrix& x, int hidden_dim,
                                const SparseAeHyper& hyper, Vector& grad);

struct TrainOptions {
  std::uint64_t seed = 0;
  bool fine_tune = false;  // joint end-to-end pass after layer-wise training
  ScgOptions scg;          // max_iters is overridden per stage by hyper.max_epochs
};

struct TrainLog {
  std::vector<std::vector<double>> stage_costs;  // best cost per SCG iteration
  std::vector<double> fine_tune_costs;
};

struct DsaModel {
  std::vector<AeStage> stages;       // sizes e.g. D->15, 15->10, 10->3
  std::vector<SparseAeHyper> hypers; // one per stage
  NormalizationSpec norm;            // spec used at training time

  int input_dim() const { return stages.front().input_dim(); }
  int latent_dim() const { return stages.back().hidden_dim(); }
  void validate() const;
};

// Layer-wise stacked training on normalized data (rows in [0,1]).
DsaModel train_stacked(const Matrix& x01, const std::vector<int>& hidden_sizes,
                       const std::vector<SparseAeHyper>& hypers,
                       const TrainOptions& opts = {}, TrainLog* log = nullptr);

Matrix encode(const DsaModel& model, const Matrix& x01);
Matrix decode(const DsaModel& model, const Matrix& z);
double reconstruction_mse(const Matrix& x, const Matrix& x_prime);

void save_model(const DsaModel& model, const std::string& path);
DsaModel load_model(const std::string& path);

}  // namespace emdens

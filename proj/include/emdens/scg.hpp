#pragma once

#include "emdens/types.hpp"

#include <functional>

namespace emdens {

/// Objective callback: parameters -> (value, gradient).
using Objective = std::function<double(const Vector&, Vector&)>;

struct ScgOptions {
  int max_iters = 10000;
  double sigma = 1e-5;        // finite step for the Hessian-vector estimate
  double lambda_init = 1e-7;  // initial scale (Levenberg-Marquardt style)
  double grad_tol = 1e-8;
  double cost_tol = 1e-12;    // minimum cost improvement ...
  int patience = 10;          // ... over this many iterations
};

struct ScgResult {
  Vector params;
  double cost = 0.0;
  int iterations = 0;
  std::vector<double> cost_history;  // best cost after each iteration, non-increasing
};

// Moller's scaled conjugate gradient. Never returns a cost above the
// initial one; throws NumericError if the objective is non-finite at the
// start or stays non-finite after repeated step shrinking.
ScgResult scg_minimize(const Objective& objective, const Vector& init,
                       const ScgOptions& opts = {});

}  // namespace emdens

#include "emdens/scg.hpp"

#include <cmath>

namespace emdens {

ScgResult scg_minimize(const Objective& objective, const Vector& init,
                       const ScgOptions& opts) {
  const Eigen::Index n = init.size();
  Vector w = init;
  Vector grad(n);
  double f = objective(w, grad);
  if (!std::isfinite(f) || !grad.allFinite())
    throw NumericError("objective non-finite at initial point");

  ScgResult res;
  res.params = w;
  res.cost = f;
  res.cost_history.push_back(f);

  Vector r = -grad;            // steepest descent direction
  Vector p = r;                // conjugate direction
  double lambda = opts.lambda_init;
  double lambda_bar = 0.0;
  bool success = true;
  double delta = 0.0;
  Vector step_grad(n), trial_grad(n), s(n);
  int consecutive_failures = 0;
  int stall = 0;

  for (int k = 1; k <= opts.max_iters; ++k) {
    const double p_norm2 = p.squaredNorm();
    if (p_norm2 == 0.0 || r.norm() < opts.grad_tol) break;

    if (success) {
      // second-order information along p via a finite difference of gradients
      const double sigma_k = opts.sigma / std::sqrt(p_norm2);
      Vector w_trial = w + sigma_k * p;
      const double f_trial = objective(w_trial, step_grad);
      if (!std::isfinite(f_trial) || !step_grad.allFinite()) {
        lambda = std::max(lambda * 4.0, 1e-16);
        success = false;
        if (++consecutive_failures > 100)
          throw NumericError("scg: objective persistently non-finite");
        continue;
      }
      s = (step_grad - grad) / sigma_k;
      delta = p.dot(s);
    }

    delta += (lambda - lambda_bar) * p_norm2;
    if (delta <= 0.0) {  // make the Hessian estimate positive definite
      lambda_bar = 2.0 * (lambda - delta / p_norm2);
      delta = -delta + lambda * p_norm2;
      lambda = lambda_bar;
    }

    const double mu = p.dot(r);
    const double alpha = mu / delta;

    Vector w_new = w + alpha * p;
    const double f_new = objective(w_new, trial_grad);
    const bool finite = std::isfinite(f_new) && trial_grad.allFinite();
    const double comparison =
        finite ? 2.0 * delta * (f - f_new) / (mu * mu) : -1.0;

    if (finite && comparison >= 0.0) {
      w = std::move(w_new);
      f = f_new;
      grad = trial_grad;
      lambda_bar = 0.0;
      success = true;
      consecutive_failures = 0;
      Vector r_new = -grad;
      if (k % static_cast<int>(n) == 0) {
        p = r_new;  // periodic restart
      } else {
        const double beta = (r_new.squaredNorm() - r_new.dot(r)) / mu;
        p = r_new + beta * p;
      }
      r = std::move(r_new);
      if (comparison >= 0.75) lambda = std::max(lambda * 0.25, 1e-20);
    } else {
      lambda_bar = lambda;
      success = false;
      if (!finite && ++consecutive_failures > 100)
        throw NumericError("scg: objective persistently non-finite");
    }
    if (comparison < 0.25) lambda += delta * (1.0 - comparison) / p_norm2;

    if (f < res.cost - opts.cost_tol)
      stall = 0;
    else if (++stall >= opts.patience) {
      if (f < res.cost) {
        res.cost = f;
        res.params = w;
      }
      res.cost_history.push_back(res.cost);
      res.iterations = k;
      return res;
    }
    if (f < res.cost) {
      res.cost = f;
      res.params = w;
    }
    res.cost_history.push_back(res.cost);
    res.iterations = k;
  }
  return res;
}

}  // namespace emdens

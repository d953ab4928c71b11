#pragma once

#include <optional>

#include "ttr/kronecker.hpp"
#include "ttr/tensor.hpp"

namespace ttr {

struct FlipFlopOptions {
  double tol = 1e-8;
  Index max_sweeps = 200;
  std::optional<KroneckerScale> init;  // identity when absent
};

struct FlipFlopResult {
  KroneckerScale xi;
  Index sweeps = 0;
  double last_delta = 0.0;
  bool converged = false;
};

/// Weighted flip-flop fixed point for the Kronecker scale of centered
/// residuals (stacked along the last mode):
///   Sigma_m <- (n p_{-m})^{-1} sum_i w_i R_{i(m)} (kron_{j != m} Sigma_j^{-1}) R_{i(m)}^T
/// cycled over modes until the normalized mode matrices stop moving.
/// Requires n p_{-m} > p_m for every mode.
FlipFlopResult weighted_flip_flop(const DenseTensor& residuals, const Eigen::VectorXd& weights,
                                  const FlipFlopOptions& opts = {});

/// The weighted Gaussian objective the flip-flop minimizes:
///   sum_m (n p_{-m}/2) log|Sigma_m| + (1/2) sum_i w_i ||R_i||^2_Xi.
double flip_flop_objective(const DenseTensor& residuals, const Eigen::VectorXd& weights, const KroneckerScale& xi);

struct PluginOptions {
  double tol = 1e-8;
  Index max_outer = 200;
  FlipFlopOptions flip_flop;
};

struct PluginResult {
  KroneckerScale xi;
  Eigen::VectorXd weights;
  Index outer_iterations = 0;
  bool converged = false;
  double objective = 0.0;
};

/// Plug-in likelihood scale estimate given fixed residuals: alternates the
/// t-model weight update with a full weighted flip-flop solve until the
/// profile objective stops moving.  nu = +inf collapses to a single
/// unit-weight flip-flop.
PluginResult plugin_scale(const DenseTensor& residuals, double nu, const PluginOptions& opts = {});

/// Non-iterative per-mode covariance from weighted residual Grams:
///   Sigma_m = (n p_{-m})^{-1} sum_i w_i R_{i(m)} R_{i(m)}^T,
/// normalized for identifiability.  Rejects singular output.
KroneckerScale host_sigma(const DenseTensor& residuals, const Eigen::VectorXd& weights);

/// p / ||R_i||_F^2 per sample; rejects all-zero residuals.
Eigen::VectorXd euclidean_weights(const DenseTensor& residuals);

}  // namespace ttr

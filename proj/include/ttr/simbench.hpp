#pragma once

#include <map>
#include <string>

#include "ttr/estimators.hpp"

namespace ttr {

enum class SimModel { M1, M2, M3, M4_rhombus, M4_bat, M4_cross };

std::string sim_model_name(SimModel m);
SimModel sim_model_from_name(const std::string& name);

struct SimConfig {
  SimModel model = SimModel::M1;
  Index rows = 32;
  Index cols = 32;
  Index n = 100;           // M3 overrides to 50 in default_sim_config
  double rho = 0.5;
  double nu = 4.0;         // error dof; +inf draws tensor normal errors
  double signal = 1.0;     // M3 uses 0.8 by default
  double sparsity = 0.03;  // M1 only
  std::uint64_t seed = 0;
  Index replicates = 100;

  Index n_predictors() const;
  void validate() const;
};

SimConfig default_sim_config(SimModel model);

/// One simulated replicate: data, the true coefficient tensor, and the truth
/// mask over coefficients (elementwise) or response cells (M4, fiber-level).
struct SimDraw {
  Dataset data;
  DenseTensor b_true;
  std::vector<bool> active_true;  // length p*q, or p for fiber-level truth
  bool fiber_level = false;
};

/// Deterministic given (config.seed, replicate): every replicate regenerates
/// independently of the others.
SimDraw generate(const SimConfig& config, Index replicate);

/// 32 x 32 response-cell masks for the M3/M4 signal shapes.  These bitmaps
/// are artifact fixtures (fixtures/shape_masks_v1.txt is the shipped copy).
using ShapeMask = std::vector<std::vector<bool>>;
const std::map<std::string, ShapeMask>& shape_masks();
std::string shape_masks_fixture_text();

/// ||b_hat - b||_F^2 / ||b||_F^2 * 100.
double ree(const DenseTensor& b_hat, const DenseTensor& b_true);

/// True/false positive rates in percent over a common index universe.
std::pair<double, double> tpr_fpr(const std::vector<bool>& selected, const std::vector<bool>& truth);

/// Selection mask of a fitted coefficient tensor at the truth's granularity.
std::vector<bool> selection_mask(const FitResult& fit, bool fiber_level);

struct BenchRequest {
  SimConfig config;
  std::vector<Method> methods;
  PenaltyKind penalty = PenaltyKind::elementwise;
  double nu_fit = 4.0;
  CvOptions cv;
  Index jobs = 1;
  bool fixed_lambda = false;  // skip CV and use lambda below for all methods
  double lambda = 0.0;
};

struct MethodMetrics {
  Method method = Method::ols;
  Index replicates = 0;
  Index failures = 0;
  double ree_mean = 0.0, ree_se = 0.0;
  double tpr_mean = 0.0, tpr_se = 0.0;
  double fpr_mean = 0.0, fpr_se = 0.0;
  bool selection_defined = true;  // false for dense fits (plain OLS)
};

/// Per-replicate raw metrics, exposed so grids can be aggregated externally.
struct ReplicateMetrics {
  bool ok = false;
  double ree = 0.0, tpr = 0.0, fpr = 0.0;
};

/// Runs the replicate grid for every requested method.  Output is identical
/// for any worker count: replicates are seeded individually and aggregated in
/// replicate order.
std::vector<MethodMetrics> run_grid(const BenchRequest& request);

/// Raw per-replicate metrics table (methods x replicates), same determinism
/// contract.
std::vector<std::vector<ReplicateMetrics>> run_grid_raw(const BenchRequest& request);

}  // namespace ttr

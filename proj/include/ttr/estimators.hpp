#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ttr/covariance.hpp"
#include "ttr/dataset.hpp"
#include "ttr/distribution.hpp"

namespace ttr {

enum class Method { ols, tols, apl, apn, apt, ost, host };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

enum class PenaltyKind { elementwise, group };

/// Adaptive penalty: lambda plus per-coefficient weights (p x q matrix for
/// elementwise, p x 1 for group).  A weight of +inf pins the coefficient (or
/// whole fiber) at exactly zero, which is how a pilot estimate of exactly
/// zero is honored.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::elementwise;
  double lambda = 0.0;
  Eigen::MatrixXd weights;
};

/// r = 1/pilot^2 elementwise, or r_J = 1/||fiber_J||^2 for groups.
PenaltySpec adaptive_penalty(const DenseTensor& pilot_b, PenaltyKind kind, double lambda);

struct FitDiagnostics {
  Index iterations = 0;
  double objective = 0.0;
  bool converged = false;
  double kkt_residual = 0.0;
};

struct FitResult {
  DenseTensor b_hat;  // p_1 x ... x p_M x q
  std::optional<KroneckerScale> xi_hat;
  std::optional<Eigen::VectorXd> sample_weights;
  Method method = Method::ols;
  PenaltyKind penalty = PenaltyKind::elementwise;
  double lambda = 0.0;
  double lambda_pilot = 0.0;
  double nu_used = kInfiniteDof;
  FitDiagnostics diagnostics;

  Eigen::Map<const Eigen::MatrixXd> theta() const;  // p x q view of b_hat
  std::vector<Index> active_set() const;            // linear indices into vec(b_hat)
};

// ---------------------------------------------------------------------------
// Penalized weighted least squares engine.
//
// Minimizes, over Theta in R^{p x q},
//   (1/2) sum_i w_i (y_i - Theta x_i)^T Omega (y_i - Theta x_i) + penalty
// where Omega is the Kronecker product of the given mode inverses (identity
// when absent).  Cyclic coordinate descent for the elementwise penalty,
// groupwise majorization-descent over the rows of Theta for the group
// penalty; both are certified by a KKT residual at the returned point.
// ---------------------------------------------------------------------------

struct WlsOptions {
  double tol = 1e-6;
  Index max_sweeps = 10000;
  const Eigen::MatrixXd* warm_start = nullptr;  // p x q
};

struct WlsSolution {
  Eigen::MatrixXd theta;
  Index sweeps = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  double objective = 0.0;
};

WlsSolution solve_penalized_wls(Eigen::Ref<const Eigen::MatrixXd> ymat, Eigen::Ref<const Eigen::MatrixXd> x,
                                const Eigen::VectorXd& sample_weights,
                                const std::vector<Eigen::MatrixXd>* mode_invs, const PenaltySpec& penalty,
                                const WlsOptions& opts = {});

/// Smallest lambda that zeroes every coefficient of the problem above.
double lambda_max(Eigen::Ref<const Eigen::MatrixXd> ymat, Eigen::Ref<const Eigen::MatrixXd> x,
                  const Eigen::VectorXd& sample_weights, const std::vector<Eigen::MatrixXd>* mode_invs,
                  const PenaltySpec& penalty);

/// Objective of the problem above at a given Theta.
double penalized_wls_objective(Eigen::Ref<const Eigen::MatrixXd> ymat, Eigen::Ref<const Eigen::MatrixXd> x,
                               const Eigen::VectorXd& sample_weights, const std::vector<Eigen::MatrixXd>* mode_invs,
                               const PenaltySpec& penalty, Eigen::Ref<const Eigen::MatrixXd> theta);

// ---------------------------------------------------------------------------
// Estimators.
// ---------------------------------------------------------------------------

struct FitConfig {
  Method method = Method::ost;
  PenaltyKind penalty = PenaltyKind::elementwise;
  double nu = 4.0;  // estimation dof for apt/ost; +inf for apn is implied
  double lambda = 0.0;
  double lambda_pilot = -1.0;  // < 0: reuse lambda (Algorithm 1 uses one symbol)
  bool fast_mode = false;      // coordinate tolerance 1e-4 instead of 1e-6
  bool host_two_batch = false;
  bool apl_penalty_weights = false;  // use APL instead of OLS as pilot for the final penalty
  double mm_tol = 1e-8;
  Index mm_max_iterations = 200;
  double tols_level = 0.05;  // Bonferroni-corrected test level for tols

  double cd_tol() const { return fast_mode ? 1e-4 : 1e-6; }
};

FitResult fit_ols(const Dataset& data);
FitResult fit_tols(const Dataset& data, double level = 0.05);
FitResult fit_apl(const Dataset& data, const PenaltySpec& penalty, const FitConfig& config = {});
FitResult fit_apn(const Dataset& data, const PenaltySpec& penalty, const FitConfig& config = {});
FitResult fit_apt_mm(const Dataset& data, const PenaltySpec& penalty, double nu, const FitConfig& config = {});
FitResult fit_ost(const Dataset& data, const PenaltySpec& penalty, double nu = 4.0, const FitConfig& config = {});
FitResult fit_host(const Dataset& data, const PenaltySpec& penalty, const FitConfig& config = {});

/// Group-penalized variant of APL / OST / APT, with r_J = 1/||B^OLS_J||^2.
FitResult fit_group(const Dataset& data, double lambda, Method base, const FitConfig& config = {});

/// Dispatcher driven by FitConfig (penalty constructed from the pilot
/// internally; config.lambda must be set for penalized methods).
FitResult fit(const Dataset& data, const FitConfig& config);

/// Objective value of the exact penalized likelihood the MM methods descend:
/// Eq-(3)-style for finite nu, its Gaussian limit for nu = +inf.
double penalized_likelihood_objective(const Dataset& data, const DenseTensor& b, const KroneckerScale& xi, double nu,
                                      const PenaltySpec& penalty);

/// Per-outer-iteration trace of that objective (exposed for the MM
/// monotonicity contract).
struct MmTrace {
  std::vector<double> objective;
};

FitResult fit_apt_mm_traced(const Dataset& data, const PenaltySpec& penalty, double nu, const FitConfig& config,
                            MmTrace* trace);

// ---------------------------------------------------------------------------
// Cross-validation.
// ---------------------------------------------------------------------------

struct CvOptions {
  Index folds = 5;
  std::uint64_t seed = 0;
  Index grid_size = 50;
  double grid_ratio = 1e-4;            // lambda_min = ratio * lambda_max
  std::vector<double> grid;            // explicit grid overrides auto generation
};

struct CvResult {
  double lambda_best = 0.0;
  double lambda_pilot_best = 0.0;
  std::vector<double> lambdas;  // descending
  std::vector<double> cv_error;
  std::vector<double> pilot_lambdas;
  std::vector<double> pilot_cv_error;
};

/// Deterministic fold assignment (round robin over a seeded shuffle).
std::vector<Index> cv_fold_assignment(Index n, Index folds, std::uint64_t seed);

/// Auto grid: grid_size log-spaced values from lambda_max down.
std::vector<double> lambda_grid(double lambda_max_value, Index grid_size, double ratio);

CvResult cross_validate(const Dataset& data, const FitConfig& config, const CvOptions& opts);

/// Cross-validate, then fit on the full data at the selected lambda(s).
FitResult fit_cv(const Dataset& data, const FitConfig& config, const CvOptions& opts, CvResult* cv_out = nullptr);

}  // namespace ttr

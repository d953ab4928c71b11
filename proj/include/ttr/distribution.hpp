#pragma once

#include <limits>
#include <vector>

#include "ttr/kronecker.hpp"
#include "ttr/rng.hpp"
#include "ttr/tensor.hpp"

namespace ttr {

inline constexpr double kInfiniteDof = std::numeric_limits<double>::infinity();

/// Parameters of the tensor normal / tensor t family.  nu = +inf selects the
/// tensor normal member.
struct TensorTParams {
  DenseTensor mu;
  KroneckerScale xi;
  double nu = kInfiniteDof;

  void validate() const;
};

/// A tensor t draw together with its latent chi-square mixing variable
/// G ~ chi^2_nu / nu (tests exploit the latent).
struct TtDraw {
  DenseTensor y;
  double latent_g = 1.0;
};

DenseTensor sample_tn(const TensorTParams& params, Rng& rng);

/// Samples against precomputed symmetric mode square roots (saves repeated
/// eigendecompositions when drawing many variates).
DenseTensor sample_tn(const DenseTensor& mu, const std::vector<Eigen::MatrixXd>& mode_roots, Rng& rng);

TtDraw sample_tt(const TensorTParams& params, Rng& rng);
TtDraw sample_tt(const DenseTensor& mu, const std::vector<Eigen::MatrixXd>& mode_roots, double nu, Rng& rng);

double log_density_tt(const DenseTensor& y, const TensorTParams& params);

/// The t-model downweighting factor (nu + p) / (nu + dist_sq); equals 1 for
/// nu = +inf.
inline double tt_weight(double nu, double p, double dist_sq) {
  if (nu == kInfiniteDof) return 1.0;
  return (nu + p) / (nu + dist_sq);
}

/// Negative log-likelihood of residuals stacked along the last mode.
double tt_nll_stacked(const DenseTensor& residuals, const KroneckerScale& xi, double nu);

struct EmOptions {
  double tol = 1e-8;
  Index max_iterations = 500;
  double flip_flop_tol = 1e-8;
  Index flip_flop_max_sweeps = 200;
};

struct LocationScaleFit {
  DenseTensor mu;
  KroneckerScale xi;
  Index iterations = 0;
  bool converged = false;
  std::vector<double> nll_trace;
};

/// EM for the MLE of (mu, Xi) at fixed nu from i.i.d. samples stacked along
/// the last mode of `samples`.
LocationScaleFit em_fit_location_scale(const DenseTensor& samples, double nu, const EmOptions& opts = {});

struct EcmeOptions {
  double nu_init = 4.0;
  double bracket_low = 0.1;
  double bracket_high = 1000.0;
  double tol = 1e-6;
  Index max_iterations = 100;
  double flip_flop_tol = 1e-8;
  Index flip_flop_max_sweeps = 200;
  Index large_p_threshold = 500;
};

struct NuFit {
  double nu = 4.0;
  KroneckerScale xi;
  Index iterations = 0;
  bool converged = false;
  bool hit_bracket_bound = false;
  bool large_p_warning = false;
};

/// ECME estimation of the degrees of freedom from centered residuals stacked
/// along the last mode; alternates a weighted flip-flop for Xi with a
/// bracketed root solve of the profile score in nu.
NuFit ecme_estimate_nu(const DenseTensor& residuals, const EcmeOptions& opts = {});

}  // namespace ttr

#include "ttr/distribution.hpp"

#include <cmath>

#include "ttr/covariance.hpp"
#include "ttr/special.hpp"

namespace ttr {

void TensorTParams::validate() const {
  if (!(nu > 0.0)) throw std::invalid_argument("degrees of freedom must be positive (or +inf)");
  if (mu.dims() != xi.dims()) throw std::invalid_argument("mean dims must match the scale mode dims");
}

DenseTensor sample_tn(const TensorTParams& params, Rng& rng) {
  params.validate();
  return sample_tn(params.mu, mode_sqrts(params.xi), rng);
}

DenseTensor sample_tn(const DenseTensor& mu, const std::vector<Eigen::MatrixXd>& mode_roots, Rng& rng) {
  DenseTensor z(mu.dims());
  for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  DenseTensor y = tucker(z, mode_roots);
  y.as_vector() += mu.as_vector();
  return y;
}

TtDraw sample_tt(const TensorTParams& params, Rng& rng) {
  params.validate();
  return sample_tt(params.mu, mode_sqrts(params.xi), params.nu, rng);
}

TtDraw sample_tt(const DenseTensor& mu, const std::vector<Eigen::MatrixXd>& mode_roots, double nu, Rng& rng) {
  if (nu == kInfiniteDof) return {sample_tn(mu, mode_roots, rng), 1.0};
  if (!(nu > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  DenseTensor z(mu.dims());
  for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  const double g = rng.chi_square(nu) / nu;
  DenseTensor y = tucker(z, mode_roots);
  y.as_vector() = y.as_vector() / std::sqrt(g) + mu.as_vector();
  return {std::move(y), g};
}

double log_density_tt(const DenseTensor& y, const TensorTParams& params) {
  params.validate();
  if (!y.same_dims(params.mu)) throw std::invalid_argument("sample dims must match the mean dims");
  DenseTensor centered = y;
  centered.as_vector() -= params.mu.as_vector();
  const double dist_sq = mahalanobis_sq(centered, params.xi);
  const double p = static_cast<double>(y.size());
  const double log_det = kron_log_det(params.xi);
  if (params.nu == kInfiniteDof) {
    return -0.5 * p * std::log(2.0 * M_PI) - 0.5 * log_det - 0.5 * dist_sq;
  }
  const double nu = params.nu;
  return std::lgamma(0.5 * (nu + p)) - std::lgamma(0.5 * nu) - 0.5 * p * std::log(M_PI * nu) - 0.5 * log_det -
         0.5 * (nu + p) * std::log1p(dist_sq / nu);
}

double tt_nll_stacked(const DenseTensor& residuals, const KroneckerScale& xi, double nu) {
  const Index n = residuals.dim(residuals.order() - 1);
  const double p = static_cast<double>(residuals.size() / n);
  const Eigen::VectorXd dist = mahalanobis_sq_stacked(residuals, mode_inverses(xi));
  const double log_det = kron_log_det(xi);
  double nll = 0.0;
  if (nu == kInfiniteDof) {
    nll = 0.5 * static_cast<double>(n) * (p * std::log(2.0 * M_PI) + log_det) + 0.5 * dist.sum();
  } else {
    const double log_const =
        std::lgamma(0.5 * (nu + p)) - std::lgamma(0.5 * nu) - 0.5 * p * std::log(M_PI * nu) - 0.5 * log_det;
    nll = -static_cast<double>(n) * log_const;
    for (Index i = 0; i < n; ++i) nll += 0.5 * (nu + p) * std::log1p(dist[i] / nu);
  }
  return nll;
}

LocationScaleFit em_fit_location_scale(const DenseTensor& samples, double nu, const EmOptions& opts) {
  if (samples.order() < 2) throw std::invalid_argument("sample stack must carry a sample mode");
  const Index n = samples.dim(samples.order() - 1);
  if (n < 2) throw std::invalid_argument("at least two samples required");
  std::vector<Index> dims = samples.dims();
  dims.pop_back();
  const Index p = product(dims);
  for (Index pm : dims) {
    if (n * (p / pm) <= pm) throw std::invalid_argument("sample size too small: need n*p_{-m} > p_m for every mode");
  }
  if (!(nu > 0.0)) throw std::invalid_argument("degrees of freedom must be positive (or +inf)");

  Eigen::Map<const Eigen::MatrixXd> ymat(samples.data(), p, n);

  LocationScaleFit fit;
  fit.mu = DenseTensor(dims);
  fit.mu.as_vector() = ymat.rowwise().mean();
  fit.xi = identity_scale(dims);

  DenseTensor residuals = samples;
  const auto refresh_residuals = [&]() {
    Eigen::Map<Eigen::MatrixXd> rmat(residuals.data(), p, n);
    rmat = ymat.colwise() - fit.mu.as_vector();
  };
  refresh_residuals();

  double prev_nll = tt_nll_stacked(residuals, fit.xi, nu);
  fit.nll_trace.push_back(prev_nll);

  FlipFlopOptions ff;
  ff.tol = opts.flip_flop_tol;
  ff.max_sweeps = opts.flip_flop_max_sweeps;

  for (Index it = 0; it < opts.max_iterations; ++it) {
    fit.iterations = it + 1;

    Eigen::VectorXd weights = Eigen::VectorXd::Ones(n);
    if (nu != kInfiniteDof) {
      const Eigen::VectorXd dist = mahalanobis_sq_stacked(residuals, mode_inverses(fit.xi));
      for (Index i = 0; i < n; ++i) weights[i] = tt_weight(nu, static_cast<double>(p), dist[i]);
    }

    fit.mu.as_vector() = (ymat * weights) / weights.sum();
    refresh_residuals();

    ff.init = fit.xi;
    fit.xi = weighted_flip_flop(residuals, weights, ff).xi;

    const double nll = tt_nll_stacked(residuals, fit.xi, nu);
    fit.nll_trace.push_back(nll);
    if (std::abs(prev_nll - nll) < opts.tol * (std::abs(prev_nll) + 1.0)) {
      fit.converged = true;
      break;
    }
    prev_nll = nll;
  }
  return fit;
}

namespace {

// Profile score in nu from the ECME conditional maximization step.
double nu_score(double nu, double p, const Eigen::VectorXd& weights) {
  const Index n = weights.size();
  double mean_term = 0.0;
  for (Index i = 0; i < n; ++i) mean_term += std::log(weights[i]) - weights[i];
  mean_term /= static_cast<double>(n);
  return -digamma(0.5 * nu) + std::log(0.5 * nu) + mean_term + 1.0 + digamma(0.5 * (nu + p)) -
         std::log(0.5 * (nu + p));
}

}  // namespace

NuFit ecme_estimate_nu(const DenseTensor& residuals, const EcmeOptions& opts) {
  if (residuals.order() < 2) throw std::invalid_argument("residual stack must carry a sample mode");
  const Index n = residuals.dim(residuals.order() - 1);
  std::vector<Index> dims = residuals.dims();
  dims.pop_back();
  const Index p = product(dims);

  NuFit fit;
  fit.nu = opts.nu_init;
  fit.xi = identity_scale(dims);
  fit.large_p_warning = p > opts.large_p_threshold;

  FlipFlopOptions ff;
  ff.tol = opts.flip_flop_tol;
  ff.max_sweeps = opts.flip_flop_max_sweeps;

  const double pd = static_cast<double>(p);
  for (Index it = 0; it < opts.max_iterations; ++it) {
    fit.iterations = it + 1;
    Eigen::VectorXd dist = mahalanobis_sq_stacked(residuals, mode_inverses(fit.xi));
    Eigen::VectorXd weights(n);
    for (Index i = 0; i < n; ++i) weights[i] = tt_weight(fit.nu, pd, dist[i]);

    ff.init = fit.xi;
    fit.xi = weighted_flip_flop(residuals, weights, ff).xi;

    dist = mahalanobis_sq_stacked(residuals, mode_inverses(fit.xi));
    for (Index i = 0; i < n; ++i) weights[i] = tt_weight(fit.nu, pd, dist[i]);

    double lo = opts.bracket_low;
    double hi = opts.bracket_high;
    const double f_lo = nu_score(lo, pd, weights);
    const double f_hi = nu_score(hi, pd, weights);
    double next_nu;
    if (f_lo > 0.0 && f_hi > 0.0) {
      next_nu = hi;
      fit.hit_bracket_bound = true;
    } else if (f_lo < 0.0 && f_hi < 0.0) {
      next_nu = lo;
      fit.hit_bracket_bound = true;
    } else {
      fit.hit_bracket_bound = false;
      double f_low_end = f_lo;
      for (int b = 0; b < 100; ++b) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = nu_score(mid, pd, weights);
        if ((f_low_end > 0.0) == (f_mid > 0.0)) {
          lo = mid;
          f_low_end = f_mid;
        } else {
          hi = mid;
        }
        if (hi - lo < 1e-10 * std::max(1.0, hi)) break;
      }
      next_nu = 0.5 * (lo + hi);
    }

    const double rel_change = std::abs(next_nu - fit.nu) / std::max(1.0, fit.nu);
    fit.nu = next_nu;
    if (rel_change < opts.tol) {
      fit.converged = !fit.hit_bracket_bound;
      break;
    }
  }
  return fit;
}

}  // namespace ttr

#include "ttr/covariance.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "ttr/distribution.hpp"

namespace ttr {

namespace {

struct StackShape {
  std::vector<Index> dims;  // response dims only
  Index n = 0;
  Index p = 0;
};

StackShape stack_shape(const DenseTensor& residuals) {
  if (residuals.order() < 2) throw std::invalid_argument("residual stack must carry a sample mode");
  StackShape s;
  s.dims = residuals.dims();
  s.n = s.dims.back();
  s.dims.pop_back();
  s.p = product(s.dims);
  return s;
}

void check_weights(const Eigen::VectorXd& weights, Index n) {
  if (weights.size() != n) throw std::invalid_argument("weight count must equal the sample count");
  for (Index i = 0; i < n; ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw std::invalid_argument("sample weights must be positive and finite");
    }
  }
}

double max_normalized_delta(const KroneckerScale& a, const KroneckerScale& b) {
  const KroneckerScale na = normalize(a);
  const KroneckerScale nb = normalize(b);
  double delta = 0.0;
  for (std::size_t m = 0; m < na.modes.size(); ++m) {
    const double denom = nb.modes[m].norm();
    delta = std::max(delta, (na.modes[m] - nb.modes[m]).norm() / (denom > 0.0 ? denom : 1.0));
  }
  return delta;
}

}  // namespace

FlipFlopResult weighted_flip_flop(const DenseTensor& residuals, const Eigen::VectorXd& weights,
                                  const FlipFlopOptions& opts) {
  const StackShape shape = stack_shape(residuals);
  const Index m_count = static_cast<Index>(shape.dims.size());
  check_weights(weights, shape.n);
  for (Index m = 0; m < m_count; ++m) {
    const Index pm = shape.dims[static_cast<std::size_t>(m)];
    if (shape.n * (shape.p / pm) <= pm) {
      throw std::invalid_argument("sample size too small: need n*p_{-m} > p_m for every mode");
    }
  }

  FlipFlopResult result;
  result.xi = opts.init ? *opts.init : identity_scale(shape.dims);
  if (opts.init) validate_spd(result.xi);

  // Vector case: single closed-form weighted covariance, no iteration.
  if (m_count == 1) {
    Eigen::Map<const Eigen::MatrixXd> rmat(residuals.data(), shape.p, shape.n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(shape.p, shape.p);
    Eigen::MatrixXd scaled = rmat * weights.cwiseSqrt().asDiagonal();
    cov.noalias() = scaled * scaled.transpose() / static_cast<double>(shape.n);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw numerical_error("weighted residual covariance is not positive definite");
    result.xi.modes[0] = cov;
    result.xi.normalized = true;
    result.sweeps = 1;
    result.converged = true;
    return result;
  }

  std::vector<Eigen::MatrixXd> invs = mode_inverses(result.xi);

  // Residual stack with sqrt-weights folded into each sample, so the weighted
  // Gram reduces to one matricized GEMM per mode.
  DenseTensor weighted = residuals;
  {
    Eigen::Map<Eigen::MatrixXd> wmat(weighted.data(), shape.p, shape.n);
    wmat = wmat * weights.cwiseSqrt().asDiagonal();
  }

  for (Index sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    const KroneckerScale before = result.xi;
    for (Index m = 0; m < m_count; ++m) {
      const Index pm = shape.dims[static_cast<std::size_t>(m)];
      // T = weighted residuals hit by every other mode's inverse.
      DenseTensor t = weighted;
      for (Index j = 0; j < m_count; ++j) {
        if (j != m) t = mode_product(t, invs[static_cast<std::size_t>(j)], j);
      }
      const Eigen::MatrixXd rm = matricize(weighted, m);
      const Eigen::MatrixXd tm = matricize(t, m);
      Eigen::MatrixXd sigma = rm * tm.transpose() / static_cast<double>(shape.n * (shape.p / pm));
      sigma = 0.5 * (sigma + sigma.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(sigma);
      if (llt.info() != Eigen::Success) {
        throw numerical_error("flip-flop iterate lost positive definiteness at mode " + std::to_string(m));
      }
      result.xi.modes[static_cast<std::size_t>(m)] = sigma;
      Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(pm, pm));
      invs[static_cast<std::size_t>(m)] = 0.5 * (inv + inv.transpose());
    }
    result.sweeps = sweep;
    result.last_delta = max_normalized_delta(result.xi, before);
    if (result.last_delta < opts.tol) {
      result.converged = true;
      break;
    }
  }

  result.xi = normalize(result.xi);
  return result;
}

double flip_flop_objective(const DenseTensor& residuals, const Eigen::VectorXd& weights, const KroneckerScale& xi) {
  const StackShape shape = stack_shape(residuals);
  const Eigen::VectorXd dist = mahalanobis_sq_stacked(residuals, mode_inverses(xi));
  double obj = 0.5 * static_cast<double>(shape.n) * kron_log_det(xi);
  obj += 0.5 * weights.dot(dist);
  return obj;
}

PluginResult plugin_scale(const DenseTensor& residuals, double nu, const PluginOptions& opts) {
  const StackShape shape = stack_shape(residuals);
  const double p = static_cast<double>(shape.p);

  PluginResult result;
  result.weights = Eigen::VectorXd::Ones(shape.n);

  FlipFlopOptions ff = opts.flip_flop;
  if (!ff.init) ff.init = identity_scale(shape.dims);

  if (nu == kInfiniteDof) {
    result.xi = weighted_flip_flop(residuals, result.weights, ff).xi;
    result.outer_iterations = 1;
    result.converged = true;
    result.objective = tt_nll_stacked(residuals, result.xi, nu);
    return result;
  }

  result.xi = *ff.init;
  double prev_obj = std::numeric_limits<double>::infinity();
  for (Index outer = 0; outer < opts.max_outer; ++outer) {
    result.outer_iterations = outer + 1;
    const Eigen::VectorXd dist = mahalanobis_sq_stacked(residuals, mode_inverses(result.xi));
    for (Index i = 0; i < shape.n; ++i) result.weights[i] = tt_weight(nu, p, dist[i]);

    ff.init = result.xi;
    result.xi = weighted_flip_flop(residuals, result.weights, ff).xi;

    const double obj = tt_nll_stacked(residuals, result.xi, nu);
    if (std::abs(prev_obj - obj) < opts.tol * (std::abs(obj) + 1.0)) {
      result.converged = true;
      result.objective = obj;
      break;
    }
    prev_obj = obj;
    result.objective = obj;
  }
  const Eigen::VectorXd dist = mahalanobis_sq_stacked(residuals, mode_inverses(result.xi));
  for (Index i = 0; i < shape.n; ++i) result.weights[i] = tt_weight(nu, p, dist[i]);
  return result;
}

KroneckerScale host_sigma(const DenseTensor& residuals, const Eigen::VectorXd& weights) {
  const StackShape shape = stack_shape(residuals);
  check_weights(weights, shape.n);
  const Index m_count = static_cast<Index>(shape.dims.size());

  DenseTensor weighted = residuals;
  {
    Eigen::Map<Eigen::MatrixXd> wmat(weighted.data(), shape.p, shape.n);
    wmat = wmat * weights.cwiseSqrt().asDiagonal();
  }

  KroneckerScale xi;
  xi.modes.reserve(static_cast<std::size_t>(m_count));
  for (Index m = 0; m < m_count; ++m) {
    const Index pm = shape.dims[static_cast<std::size_t>(m)];
    const Eigen::MatrixXd rm = matricize(weighted, m);
    Eigen::MatrixXd sigma = rm * rm.transpose() / static_cast<double>(shape.n * (shape.p / pm));
    sigma = 0.5 * (sigma + sigma.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("closed-form mode covariance is singular at mode " + std::to_string(m) +
                            " (n p_{-m} too small)");
    }
    xi.modes.push_back(std::move(sigma));
  }
  return normalize(xi);
}

Eigen::VectorXd euclidean_weights(const DenseTensor& residuals) {
  const StackShape shape = stack_shape(residuals);
  Eigen::Map<const Eigen::MatrixXd> rmat(residuals.data(), shape.p, shape.n);
  Eigen::VectorXd out(shape.n);
  for (Index i = 0; i < shape.n; ++i) {
    const double sq = rmat.col(i).squaredNorm();
    if (!(sq > 0.0)) throw numerical_error("all-zero residual: Euclidean weight undefined");
    out[i] = static_cast<double>(shape.p) / sq;
  }
  return out;
}

}  // namespace ttr

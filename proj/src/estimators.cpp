#include "ttr/estimators.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "ttr/special.hpp"

namespace ttr {

std::string method_name(Method m) {
  switch (m) {
    case Method::ols: return "ols";
    case Method::tols: return "tols";
    case Method::apl: return "apl";
    case Method::apn: return "apn";
    case Method::apt: return "apt";
    case Method::ost: return "ost";
    case Method::host: return "host";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  if (name == "ols") return Method::ols;
  if (name == "tols") return Method::tols;
  if (name == "apl") return Method::apl;
  if (name == "apn") return Method::apn;
  if (name == "apt") return Method::apt;
  if (name == "ost") return Method::ost;
  if (name == "host") return Method::host;
  throw std::invalid_argument("unknown method: " + name);
}

PenaltySpec adaptive_penalty(const DenseTensor& pilot_b, PenaltyKind kind, double lambda) {
  const Index q = pilot_b.dim(pilot_b.order() - 1);
  const Index p = pilot_b.size() / q;
  Eigen::Map<const Eigen::MatrixXd> theta(pilot_b.data(), p, q);
  PenaltySpec spec;
  spec.kind = kind;
  spec.lambda = lambda;
  if (kind == PenaltyKind::elementwise) {
    spec.weights.resize(p, q);
    for (Index j = 0; j < p; ++j) {
      for (Index k = 0; k < q; ++k) {
        const double b = theta(j, k);
        spec.weights(j, k) = (b == 0.0) ? std::numeric_limits<double>::infinity() : 1.0 / (b * b);
      }
    }
  } else {
    spec.weights.resize(p, 1);
    for (Index j = 0; j < p; ++j) {
      const double sq = theta.row(j).squaredNorm();
      spec.weights(j, 0) = (sq == 0.0) ? std::numeric_limits<double>::infinity() : 1.0 / sq;
    }
  }
  return spec;
}

Eigen::Map<const Eigen::MatrixXd> FitResult::theta() const {
  const Index q = b_hat.dim(b_hat.order() - 1);
  return {b_hat.data(), b_hat.size() / q, q};
}

std::vector<Index> FitResult::active_set() const {
  std::vector<Index> out;
  for (Index i = 0; i < b_hat.size(); ++i) {
    if (b_hat[i] != 0.0) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coordinate descent engine.
// ---------------------------------------------------------------------------

namespace {

struct WlsWork {
  Index p = 0, q = 0, n = 0;
  Eigen::MatrixXd wx;       // X diag(w) X^T
  Eigen::MatrixXd c;        // Y diag(w) X^T
  Eigen::VectorXd u2_cell;  // diag of kron of mode inverses (ones for identity)
  double wx_lambda_max = 0.0;
  std::vector<Index> mode_dims;
  bool identity = true;
  const std::vector<Eigen::MatrixXd>* invs = nullptr;

  // G = Omega * (C - Theta wx); identical to S when Omega is the identity.
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& theta) const {
    Eigen::MatrixXd s = c - theta * wx;
    if (identity) return s;
    DenseTensor st(dims_with_q(), std::vector<double>(s.data(), s.data() + s.size()));
    DenseTensor g = tucker_leading(st, *invs, static_cast<Index>(invs->size()));
    return Eigen::Map<const Eigen::MatrixXd>(g.data(), p, q);
  }

  std::vector<Index> dims_with_q() const {
    std::vector<Index> d = mode_dims;
    d.push_back(q);
    return d;
  }

  Eigen::VectorXd omega_column(Index j) const {
    if (identity) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(p);
      e[j] = 1.0;
      return e;
    }
    return kron_column(*invs, j);
  }
};

WlsWork make_work(Eigen::Ref<const Eigen::MatrixXd> ymat, Eigen::Ref<const Eigen::MatrixXd> x,
                  const Eigen::VectorXd& w, const std::vector<Eigen::MatrixXd>* mode_invs) {
  WlsWork work;
  work.p = ymat.rows();
  work.q = x.rows();
  work.n = x.cols();
  if (ymat.cols() != work.n) throw std::invalid_argument("sample counts of Y and X disagree");
  if (w.size() != work.n) throw std::invalid_argument("weight count must equal the sample count");

  const Eigen::MatrixXd xw = x * w.asDiagonal();
  work.wx.noalias() = xw * x.transpose();
  work.c.noalias() = ymat * xw.transpose();

  if (mode_invs != nullptr && !mode_invs->empty()) {
    work.identity = false;
    work.invs = mode_invs;
    work.u2_cell = kron_diagonal(*mode_invs);
    Index prod = 1;
    for (const auto& m : *mode_invs) {
      work.mode_dims.push_back(m.rows());
      prod *= m.rows();
    }
    if (prod != work.p) throw std::invalid_argument("mode inverse dims do not match the response size");
  } else {
    work.u2_cell = Eigen::VectorXd::Ones(work.p);
    work.mode_dims = {work.p};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(work.wx);
  work.wx_lambda_max = es.eigenvalues().maxCoeff();
  return work;
}

void check_penalty_shape(const PenaltySpec& penalty, Index p, Index q) {
  if (penalty.lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  if (penalty.kind == PenaltyKind::elementwise) {
    if (penalty.weights.rows() != p || penalty.weights.cols() != q) {
      throw std::invalid_argument("elementwise penalty weights must be p x q");
    }
  } else {
    if (penalty.weights.rows() != p || penalty.weights.cols() != 1) {
      throw std::invalid_argument("group penalty weights must be p x 1");
    }
  }
  for (Index i = 0; i < penalty.weights.size(); ++i) {
    const double r = penalty.weights.data()[i];
    if (!(r > 0.0)) throw std::invalid_argument("penalty weights must be positive (or +inf)");
  }
}

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

WlsSolution solve_penalized_wls(Eigen::Ref<const Eigen::MatrixXd> ymat, Eigen::Ref<const Eigen::MatrixXd> x,
                                const Eigen::VectorXd& sample_weights,
                                const std::vector<Eigen::MatrixXd>* mode_invs, const PenaltySpec& penalty,
                                const WlsOptions& opts) {
  WlsWork work = make_work(ymat, x, sample_weights, mode_invs);
  const Index p = work.p;
  const Index q = work.q;
  check_penalty_shape(penalty, p, q);
  const double lambda = penalty.lambda;
  const bool pinning = lambda > 0.0;

  WlsSolution sol;
  sol.theta = (opts.warm_start != nullptr) ? *opts.warm_start : Eigen::MatrixXd::Zero(p, q);
  if (sol.theta.rows() != p || sol.theta.cols() != q) throw std::invalid_argument("warm start has wrong shape");

  // Coefficients whose penalty weight is +inf are pinned at exactly zero.
  if (pinning) {
    if (penalty.kind == PenaltyKind::elementwise) {
      for (Index j = 0; j < p; ++j)
        for (Index k = 0; k < q; ++k)
          if (std::isinf(penalty.weights(j, k))) sol.theta(j, k) = 0.0;
    } else {
      for (Index j = 0; j < p; ++j)
        if (std::isinf(penalty.weights(j, 0))) sol.theta.row(j).setZero();
    }
  }

  Eigen::MatrixXd g;
  for (Index sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    g = work.gradient(sol.theta);
    double max_delta = 0.0;

    if (penalty.kind == PenaltyKind::elementwise) {
      for (Index j = 0; j < p; ++j) {
        for (Index k = 0; k < q; ++k) {
          const double r = penalty.weights(j, k);
          if (pinning && std::isinf(r)) continue;
          const double u2 = work.u2_cell[j] * work.wx(k, k);
          const double u1 = g(j, k) + u2 * sol.theta(j, k);
          const double threshold = pinning ? lambda * r : 0.0;
          const double updated = soft_threshold(u1, threshold) / u2;
          const double delta = updated - sol.theta(j, k);
          if (delta != 0.0) {
            sol.theta(j, k) = updated;
            if (work.identity) {
              g.row(j) -= delta * work.wx.row(k);
            } else {
              g.noalias() -= (delta * work.omega_column(j)) * work.wx.row(k);
            }
            max_delta = std::max(max_delta, std::abs(delta));
          }
        }
      }
    } else {
      for (Index j = 0; j < p; ++j) {
        const double r = penalty.weights(j, 0);
        if (pinning && std::isinf(r)) continue;
        const double h = work.u2_cell[j] * work.wx_lambda_max;
        const Eigen::VectorXd v = g.row(j).transpose() + h * sol.theta.row(j).transpose();
        const double vnorm = v.norm();
        const double threshold = pinning ? lambda * r : 0.0;
        Eigen::VectorXd updated = Eigen::VectorXd::Zero(q);
        if (vnorm > threshold) updated = (1.0 - threshold / vnorm) * v / h;
        const Eigen::VectorXd delta = updated - sol.theta.row(j).transpose();
        const double step = delta.cwiseAbs().maxCoeff();
        if (step > 0.0) {
          sol.theta.row(j) = updated.transpose();
          const Eigen::RowVectorXd wx_delta = (work.wx * delta).transpose();
          if (work.identity) {
            g.row(j) -= wx_delta;
          } else {
            g.noalias() -= work.omega_column(j) * wx_delta;
          }
          max_delta = std::max(max_delta, step);
        }
      }
    }

    sol.sweeps = sweep;
    if (max_delta < opts.tol) {
      sol.converged = true;
      break;
    }
  }

  // KKT certificate against a freshly computed gradient.
  g = work.gradient(sol.theta);
  double kkt = 0.0;
  if (penalty.kind == PenaltyKind::elementwise) {
    for (Index j = 0; j < p; ++j) {
      for (Index k = 0; k < q; ++k) {
        const double r = penalty.weights(j, k);
        if (pinning && std::isinf(r)) continue;
        const double threshold = pinning ? lambda * r : 0.0;
        const double theta = sol.theta(j, k);
        if (theta != 0.0) {
          kkt = std::max(kkt, std::abs(g(j, k) - threshold * (theta > 0.0 ? 1.0 : -1.0)));
        } else {
          kkt = std::max(kkt, std::max(std::abs(g(j, k)) - threshold, 0.0));
        }
      }
    }
  } else {
    for (Index j = 0; j < p; ++j) {
      const double r = penalty.weights(j, 0);
      if (pinning && std::isinf(r)) continue;
      const double threshold = pinning ? lambda * r : 0.0;
      const Eigen::VectorXd row = sol.theta.row(j).transpose();
      const double rnorm = row.norm();
      if (rnorm > 0.0) {
        kkt = std::max(kkt, (g.row(j).transpose() - threshold * row / rnorm).cwiseAbs().maxCoeff());
      } else {
        kkt = std::max(kkt, std::max(g.row(j).norm() - threshold, 0.0));
      }
    }
  }
  sol.kkt_residual = kkt;
  sol.objective = penalized_wls_objective(ymat, x, sample_weights, mode_invs, penalty, sol.theta);
  return sol;
}

double lambda_max(Eigen::Ref<const Eigen::MatrixXd> ymat, Eigen::Ref<const Eigen::MatrixXd> x,
                  const Eigen::VectorXd& sample_weights, const std::vector<Eigen::MatrixXd>* mode_invs,
                  const PenaltySpec& penalty) {
  WlsWork work = make_work(ymat, x, sample_weights, mode_invs);
  check_penalty_shape(penalty, work.p, work.q);
  const Eigen::MatrixXd g = work.gradient(Eigen::MatrixXd::Zero(work.p, work.q));
  double best = 0.0;
  if (penalty.kind == PenaltyKind::elementwise) {
    for (Index j = 0; j < work.p; ++j) {
      for (Index k = 0; k < work.q; ++k) {
        const double r = penalty.weights(j, k);
        if (std::isinf(r)) continue;
        best = std::max(best, std::abs(g(j, k)) / r);
      }
    }
  } else {
    for (Index j = 0; j < work.p; ++j) {
      const double r = penalty.weights(j, 0);
      if (std::isinf(r)) continue;
      best = std::max(best, g.row(j).norm() / r);
    }
  }
  return best;
}

double penalized_wls_objective(Eigen::Ref<const Eigen::MatrixXd> ymat, Eigen::Ref<const Eigen::MatrixXd> x,
                               const Eigen::VectorXd& sample_weights, const std::vector<Eigen::MatrixXd>* mode_invs,
                               const PenaltySpec& penalty, Eigen::Ref<const Eigen::MatrixXd> theta) {
  const Index p = ymat.rows();
  const Index q = x.rows();
  const Index n = x.cols();
  Eigen::MatrixXd resid = ymat - theta * x;
  double quad = 0.0;
  if (mode_invs != nullptr && !mode_invs->empty()) {
    std::vector<Index> dims;
    for (const auto& m : *mode_invs) dims.push_back(m.rows());
    dims.push_back(n);
    DenseTensor rt(dims, std::vector<double>(resid.data(), resid.data() + resid.size()));
    const Eigen::VectorXd dist = mahalanobis_sq_stacked(rt, *mode_invs);
    quad = sample_weights.dot(dist);
  } else {
    for (Index i = 0; i < n; ++i) quad += sample_weights[i] * resid.col(i).squaredNorm();
  }
  double pen = 0.0;
  if (penalty.lambda > 0.0) {
    if (penalty.kind == PenaltyKind::elementwise) {
      for (Index j = 0; j < p; ++j) {
        for (Index k = 0; k < q; ++k) {
          if (theta(j, k) != 0.0) pen += penalty.weights(j, k) * std::abs(theta(j, k));
        }
      }
    } else {
      for (Index j = 0; j < p; ++j) {
        const double rnorm = theta.row(j).norm();
        if (rnorm > 0.0) pen += penalty.weights(j, 0) * rnorm;
      }
    }
    pen *= penalty.lambda;
  }
  return 0.5 * quad + pen;
}

// ---------------------------------------------------------------------------
// Estimators.
// ---------------------------------------------------------------------------

namespace {

DenseTensor theta_to_tensor(const Eigen::MatrixXd& theta, const std::vector<Index>& response_dims) {
  std::vector<Index> dims = response_dims;
  dims.push_back(theta.cols());
  return DenseTensor(std::move(dims), std::vector<double>(theta.data(), theta.data() + theta.size()));
}

Eigen::MatrixXd ols_theta(const Dataset& data) {
  const Eigen::MatrixXd gram = data.x * data.x.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  if (!lu.isInvertible()) throw numerical_error("X X^T is singular; OLS undefined");
  return data.y_matrix() * data.x.transpose() * lu.inverse();
}

}  // namespace

FitResult fit_ols(const Dataset& data) {
  data.validate();
  if (data.n_predictors() >= data.n_samples()) throw std::invalid_argument("OLS requires q < n");
  FitResult fit;
  fit.method = Method::ols;
  fit.b_hat = theta_to_tensor(ols_theta(data), data.response_dims());
  fit.diagnostics.converged = true;
  return fit;
}

FitResult fit_tols(const Dataset& data, double level) {
  data.validate();
  const Index p = data.response_size();
  const Index q = data.n_predictors();
  const Index n = data.n_samples();
  if (n <= q) throw std::invalid_argument("tOLS requires n > q");
  Eigen::MatrixXd theta = ols_theta(data);
  const Eigen::MatrixXd gram_inv = (data.x * data.x.transpose()).llt().solve(Eigen::MatrixXd::Identity(q, q));
  const Eigen::MatrixXd resid = data.y_matrix() - theta * data.x;
  const double cutoff = chi_square_quantile(1.0 - level / static_cast<double>(p * q), 1.0);
  for (Index j = 0; j < p; ++j) {
    const double sigma_sq = resid.row(j).squaredNorm() / static_cast<double>(n - q);
    for (Index k = 0; k < q; ++k) {
      const double var = sigma_sq * gram_inv(k, k);
      const double stat = (var > 0.0) ? theta(j, k) * theta(j, k) / var : std::numeric_limits<double>::infinity();
      if (stat <= cutoff) theta(j, k) = 0.0;
    }
  }
  FitResult fit;
  fit.method = Method::tols;
  fit.b_hat = theta_to_tensor(theta, data.response_dims());
  fit.diagnostics.converged = true;
  return fit;
}

FitResult fit_apl(const Dataset& data, const PenaltySpec& penalty, const FitConfig& config) {
  data.validate();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(data.n_samples());
  WlsOptions opts;
  opts.tol = config.cd_tol();
  WlsSolution sol = solve_penalized_wls(data.y_matrix(), data.x, ones, nullptr, penalty, opts);
  FitResult fit;
  fit.method = Method::apl;
  fit.penalty = penalty.kind;
  fit.lambda = penalty.lambda;
  fit.b_hat = theta_to_tensor(sol.theta, data.response_dims());
  fit.diagnostics = {sol.sweeps, sol.objective, sol.converged, sol.kkt_residual};
  return fit;
}

double penalized_likelihood_objective(const Dataset& data, const DenseTensor& b, const KroneckerScale& xi, double nu,
                                      const PenaltySpec& penalty) {
  const Index n = data.n_samples();
  const double p = static_cast<double>(data.response_size());
  const DenseTensor resid = residual_stack(data, b);
  const Eigen::VectorXd dist = mahalanobis_sq_stacked(resid, mode_inverses(xi));
  double obj = 0.5 * static_cast<double>(n) * kron_log_det(xi);
  if (nu == kInfiniteDof) {
    obj += 0.5 * dist.sum();
  } else {
    for (Index i = 0; i < n; ++i) obj += 0.5 * (nu + p) * std::log1p(dist[i] / nu);
  }
  const Index q = data.n_predictors();
  Eigen::Map<const Eigen::MatrixXd> theta(b.data(), b.size() / q, q);
  if (penalty.lambda > 0.0) {
    if (penalty.kind == PenaltyKind::elementwise) {
      for (Index j = 0; j < theta.rows(); ++j)
        for (Index k = 0; k < q; ++k)
          if (theta(j, k) != 0.0) obj += penalty.lambda * penalty.weights(j, k) * std::abs(theta(j, k));
    } else {
      for (Index j = 0; j < theta.rows(); ++j) {
        const double rnorm = theta.row(j).norm();
        if (rnorm > 0.0) obj += penalty.lambda * penalty.weights(j, 0) * rnorm;
      }
    }
  }
  return obj;
}

namespace {

struct MmState {
  Eigen::MatrixXd theta;
  KroneckerScale xi;
};

FitResult mm_fit_core(const Dataset& data, const PenaltySpec& penalty, double nu, const FitConfig& config,
                      MmTrace* trace, const MmState* init) {
  data.validate();
  const Index n = data.n_samples();
  const double p = static_cast<double>(data.response_size());
  const std::vector<Index> rdims = data.response_dims();

  MmState state;
  if (init != nullptr) {
    state = *init;
  } else {
    state.theta = ols_theta(data);
    state.xi = identity_scale(rdims);
  }

  WlsOptions cd;
  cd.tol = config.cd_tol();

  FlipFlopOptions ff;

  DenseTensor b = theta_to_tensor(state.theta, rdims);
  double obj = penalized_likelihood_objective(data, b, state.xi, nu, penalty);
  if (trace != nullptr) trace->objective.push_back(obj);

  FitResult fit;
  fit.method = (nu == kInfiniteDof) ? Method::apn : Method::apt;
  fit.penalty = penalty.kind;
  fit.lambda = penalty.lambda;
  fit.nu_used = nu;

  Eigen::VectorXd weights = Eigen::VectorXd::Ones(n);
  for (Index it = 0; it < config.mm_max_iterations; ++it) {
    fit.diagnostics.iterations = it + 1;

    DenseTensor resid = residual_stack(data, b);
    if (nu != kInfiniteDof) {
      const Eigen::VectorXd dist = mahalanobis_sq_stacked(resid, mode_inverses(state.xi));
      for (Index i = 0; i < n; ++i) weights[i] = tt_weight(nu, p, dist[i]);
    }

    ff.init = state.xi;
    state.xi = weighted_flip_flop(resid, weights, ff).xi;

    const std::vector<Eigen::MatrixXd> invs = mode_inverses(state.xi);
    cd.warm_start = &state.theta;
    WlsSolution sol = solve_penalized_wls(data.y_matrix(), data.x, weights, &invs, penalty, cd);
    state.theta = std::move(sol.theta);
    b = theta_to_tensor(state.theta, rdims);

    const double next = penalized_likelihood_objective(data, b, state.xi, nu, penalty);
    if (trace != nullptr) trace->objective.push_back(next);
    fit.diagnostics.kkt_residual = sol.kkt_residual;
    if (std::abs(obj - next) < config.mm_tol * (std::abs(obj) + 1.0)) {
      obj = next;
      fit.diagnostics.converged = true;
      break;
    }
    obj = next;
  }

  fit.b_hat = std::move(b);
  fit.xi_hat = state.xi;
  if (nu != kInfiniteDof) {
    const DenseTensor resid = residual_stack(data, fit.b_hat);
    const Eigen::VectorXd dist = mahalanobis_sq_stacked(resid, mode_inverses(*fit.xi_hat));
    for (Index i = 0; i < n; ++i) weights[i] = tt_weight(nu, p, dist[i]);
  }
  fit.sample_weights = weights;
  fit.diagnostics.objective = obj;
  return fit;
}

}  // namespace

FitResult fit_apn(const Dataset& data, const PenaltySpec& penalty, const FitConfig& config) {
  return mm_fit_core(data, penalty, kInfiniteDof, config, nullptr, nullptr);
}

FitResult fit_apt_mm(const Dataset& data, const PenaltySpec& penalty, double nu, const FitConfig& config) {
  if (nu == kInfiniteDof) return fit_apn(data, penalty, config);
  return mm_fit_core(data, penalty, nu, config, nullptr, nullptr);
}

FitResult fit_apt_mm_traced(const Dataset& data, const PenaltySpec& penalty, double nu, const FitConfig& config,
                            MmTrace* trace) {
  return mm_fit_core(data, penalty, nu, config, trace, nullptr);
}

namespace {

struct OstPlugins {
  Eigen::MatrixXd apl_theta;
  KroneckerScale xi;
  Eigen::VectorXd weights;
};

// Algorithm steps 2-4: APL initializer, plug-in scale, and the t-model
// weights, all from a given pilot penalty.
OstPlugins ost_plugins(const Dataset& data, const PenaltySpec& pilot_penalty, double nu, const FitConfig& config) {
  OstPlugins out;
  WlsOptions cd;
  cd.tol = config.cd_tol();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(data.n_samples());
  out.apl_theta = solve_penalized_wls(data.y_matrix(), data.x, ones, nullptr, pilot_penalty, cd).theta;
  const DenseTensor resid = residual_stack(data, theta_to_tensor(out.apl_theta, data.response_dims()));
  PluginResult plug = plugin_scale(resid, nu);
  out.xi = std::move(plug.xi);
  out.weights = std::move(plug.weights);
  return out;
}

}  // namespace

FitResult fit_ost(const Dataset& data, const PenaltySpec& penalty, double nu, const FitConfig& config) {
  data.validate();
  const Index n = data.n_samples();
  const Index q = data.n_predictors();
  if (q >= n) throw std::invalid_argument("OST requires q < n");

  const Eigen::MatrixXd pilot = ols_theta(data);
  const DenseTensor pilot_b = theta_to_tensor(pilot, data.response_dims());
  const double lambda_pilot = (config.lambda_pilot >= 0.0) ? config.lambda_pilot : penalty.lambda;
  PenaltySpec pilot_penalty = adaptive_penalty(pilot_b, penalty.kind, lambda_pilot);

  OstPlugins plugins = ost_plugins(data, pilot_penalty, nu, config);

  PenaltySpec final_penalty = penalty;
  if (config.apl_penalty_weights) {
    final_penalty = adaptive_penalty(theta_to_tensor(plugins.apl_theta, data.response_dims()), penalty.kind,
                                     penalty.lambda);
  }

  const std::vector<Eigen::MatrixXd> invs = mode_inverses(plugins.xi);
  WlsOptions cd;
  cd.tol = config.cd_tol();
  cd.warm_start = &plugins.apl_theta;
  WlsSolution sol = solve_penalized_wls(data.y_matrix(), data.x, plugins.weights, &invs, final_penalty, cd);

  FitResult fit;
  fit.method = Method::ost;
  fit.penalty = penalty.kind;
  fit.lambda = penalty.lambda;
  fit.lambda_pilot = lambda_pilot;
  fit.nu_used = nu;
  fit.b_hat = theta_to_tensor(sol.theta, data.response_dims());
  fit.xi_hat = std::move(plugins.xi);
  fit.sample_weights = std::move(plugins.weights);
  fit.diagnostics = {sol.sweeps, sol.objective, sol.converged, sol.kkt_residual};
  return fit;
}

FitResult fit_host(const Dataset& data, const PenaltySpec& penalty, const FitConfig& config) {
  data.validate();
  const Index n = data.n_samples();

  Dataset batch1;
  Dataset batch2;
  if (config.host_two_batch) {
    if (n < 4) throw std::invalid_argument("two-batch HOST needs at least 4 samples");
    std::vector<Index> first, second;
    for (Index i = 0; i < n / 2; ++i) first.push_back(i);
    for (Index i = n / 2; i < n; ++i) second.push_back(i);
    batch1 = subset(data, first);
    batch2 = subset(data, second);
    if (batch1.n_predictors() >= batch1.n_samples()) throw std::invalid_argument("HOST batch too small: q < n per batch required");
  } else {
    batch1 = data;
    batch2 = data;
  }

  // Stage 1: pilot, APL, Euclidean weights, closed-form mode covariances.
  const Eigen::MatrixXd pilot = ols_theta(batch1);
  const DenseTensor pilot_b = theta_to_tensor(pilot, batch1.response_dims());
  const double lambda_pilot = (config.lambda_pilot >= 0.0) ? config.lambda_pilot : penalty.lambda;
  PenaltySpec pilot_penalty = adaptive_penalty(pilot_b, penalty.kind, lambda_pilot);

  WlsOptions cd;
  cd.tol = config.cd_tol();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(batch1.n_samples());
  Eigen::MatrixXd apl_theta = solve_penalized_wls(batch1.y_matrix(), batch1.x, ones, nullptr, pilot_penalty, cd).theta;
  DenseTensor apl_b = theta_to_tensor(apl_theta, batch1.response_dims());

  const DenseTensor resid1 = residual_stack(batch1, apl_b);
  const KroneckerScale xi = host_sigma(resid1, euclidean_weights(resid1));

  // Stage 2: weighted penalized LS on the second batch, with weights from its
  // own residuals against the stage-1 APL coefficient.
  const DenseTensor resid2 = residual_stack(batch2, apl_b);
  const Eigen::VectorXd w2 = euclidean_weights(resid2);

  PenaltySpec final_penalty = penalty;
  final_penalty.weights = pilot_penalty.weights;

  const std::vector<Eigen::MatrixXd> invs = mode_inverses(xi);
  cd.warm_start = &apl_theta;
  WlsSolution sol = solve_penalized_wls(batch2.y_matrix(), batch2.x, w2, &invs, final_penalty, cd);

  FitResult fit;
  fit.method = Method::host;
  fit.penalty = penalty.kind;
  fit.lambda = penalty.lambda;
  fit.lambda_pilot = lambda_pilot;
  fit.b_hat = theta_to_tensor(sol.theta, batch2.response_dims());
  fit.xi_hat = xi;
  fit.sample_weights = w2;
  fit.diagnostics = {sol.sweeps, sol.objective, sol.converged, sol.kkt_residual};
  return fit;
}

FitResult fit_group(const Dataset& data, double lambda, Method base, const FitConfig& config) {
  FitConfig cfg = config;
  cfg.method = base;
  cfg.penalty = PenaltyKind::group;
  cfg.lambda = lambda;
  return fit(data, cfg);
}

FitResult fit(const Dataset& data, const FitConfig& config) {
  switch (config.method) {
    case Method::ols:
      return fit_ols(data);
    case Method::tols:
      return fit_tols(data, config.tols_level);
    default:
      break;
  }
  const DenseTensor pilot_b = fit_ols(data).b_hat;
  PenaltySpec penalty = adaptive_penalty(pilot_b, config.penalty, config.lambda);
  switch (config.method) {
    case Method::apl:
      return fit_apl(data, penalty, config);
    case Method::apn:
      return fit_apn(data, penalty, config);
    case Method::apt:
      return fit_apt_mm(data, penalty, config.nu, config);
    case Method::ost:
      return fit_ost(data, penalty, config.nu, config);
    case Method::host:
      return fit_host(data, penalty, config);
    default:
      throw std::invalid_argument("unsupported method");
  }
}

// ---------------------------------------------------------------------------
// Cross-validation.
// ---------------------------------------------------------------------------

std::vector<Index> cv_fold_assignment(Index n, Index folds, std::uint64_t seed) {
  if (folds < 2 || n < folds) throw std::invalid_argument("need 2 <= folds <= n");
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(mix_seed(seed, 0xf01d5ULL));
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<Index> assignment(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i % folds;
  return assignment;
}

std::vector<double> lambda_grid(double lambda_max_value, Index grid_size, double ratio) {
  if (grid_size < 1) throw std::invalid_argument("grid size must be positive");
  if (!(lambda_max_value > 0.0)) throw std::invalid_argument("lambda_max must be positive");
  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  const double log_hi = std::log(lambda_max_value);
  const double log_lo = std::log(lambda_max_value * ratio);
  for (Index g = 0; g < grid_size; ++g) {
    const double t = (grid_size == 1) ? 0.0 : static_cast<double>(g) / static_cast<double>(grid_size - 1);
    grid[static_cast<std::size_t>(g)] = std::exp(log_hi + t * (log_lo - log_hi));
  }
  return grid;
}

namespace {

struct FoldSplit {
  Dataset train;
  Dataset test;
};

std::vector<FoldSplit> make_folds(const Dataset& data, Index folds, std::uint64_t seed) {
  const Index n = data.n_samples();
  const std::vector<Index> assignment = cv_fold_assignment(n, folds, seed);
  std::vector<FoldSplit> out;
  out.reserve(static_cast<std::size_t>(folds));
  for (Index f = 0; f < folds; ++f) {
    std::vector<Index> train_idx, test_idx;
    for (Index i = 0; i < n; ++i) {
      if (assignment[static_cast<std::size_t>(i)] == f) {
        test_idx.push_back(i);
      } else {
        train_idx.push_back(i);
      }
    }
    out.push_back({subset(data, train_idx), subset(data, test_idx)});
  }
  return out;
}

double prediction_error(const Eigen::MatrixXd& theta, const Dataset& test) {
  return (test.y_matrix() - theta * test.x).squaredNorm();
}

// Held-out squared prediction error along a descending lambda path for the
// plain (identity-scale, unit-weight) adaptive lasso.
void apl_path_errors(const std::vector<FoldSplit>& folds, const std::vector<double>& grid, PenaltyKind kind,
                     double cd_tol, std::vector<double>* errors) {
  errors->assign(grid.size(), 0.0);
  for (const FoldSplit& fold : folds) {
    const Eigen::MatrixXd pilot = ols_theta(fold.train);
    PenaltySpec penalty = adaptive_penalty(theta_to_tensor(pilot, fold.train.response_dims()), kind, 0.0);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(fold.train.n_samples());
    Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(pilot.rows(), pilot.cols());
    WlsOptions cd;
    cd.tol = cd_tol;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      penalty.lambda = grid[g];
      cd.warm_start = &warm;
      warm = solve_penalized_wls(fold.train.y_matrix(), fold.train.x, ones, nullptr, penalty, cd).theta;
      (*errors)[g] += prediction_error(warm, fold.test);
    }
  }
}

std::size_t argmin_prefer_larger_lambda(const std::vector<double>& errors) {
  std::size_t best = 0;
  for (std::size_t g = 1; g < errors.size(); ++g) {
    if (errors[g] < errors[best]) best = g;
  }
  return best;
}

}  // namespace

CvResult cross_validate(const Dataset& data, const FitConfig& config, const CvOptions& opts) {
  data.validate();
  const Index n = data.n_samples();
  if (n < opts.folds) throw std::invalid_argument("fewer samples than folds");
  if (config.method == Method::ols || config.method == Method::tols) {
    throw std::invalid_argument("method has no tuning parameter to cross-validate");
  }

  CvResult result;
  const std::vector<FoldSplit> folds = make_folds(data, opts.folds, opts.seed);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);

  // Shared grid anchor: the unit-weight identity-scale problem with the
  // full-data pilot.
  const Eigen::MatrixXd full_pilot = ols_theta(data);
  const DenseTensor full_pilot_b = theta_to_tensor(full_pilot, data.response_dims());
  PenaltySpec anchor = adaptive_penalty(full_pilot_b, config.penalty, 0.0);
  std::vector<double> base_grid = opts.grid;
  if (base_grid.empty()) {
    const double lmax = lambda_max(data.y_matrix(), data.x, ones, nullptr, anchor);
    base_grid = lambda_grid(lmax, opts.grid_size, opts.grid_ratio);
  }

  const double cd_tol = config.cd_tol();

  if (config.method == Method::apl) {
    result.lambdas = base_grid;
    apl_path_errors(folds, base_grid, config.penalty, cd_tol, &result.cv_error);
    for (double& e : result.cv_error) e /= static_cast<double>(n);
    result.lambda_best = base_grid[argmin_prefer_larger_lambda(result.cv_error)];
    return result;
  }

  if (config.method == Method::apn || config.method == Method::apt) {
    const double nu = (config.method == Method::apn) ? kInfiniteDof : config.nu;
    result.lambdas = base_grid;
    result.cv_error.assign(base_grid.size(), 0.0);
    for (const FoldSplit& fold : folds) {
      const Eigen::MatrixXd pilot = ols_theta(fold.train);
      const DenseTensor pilot_b = theta_to_tensor(pilot, fold.train.response_dims());
      MmState state;
      state.theta = pilot;
      state.xi = identity_scale(fold.train.response_dims());
      for (std::size_t g = 0; g < base_grid.size(); ++g) {
        PenaltySpec penalty = adaptive_penalty(pilot_b, config.penalty, base_grid[g]);
        FitResult f = mm_fit_core(fold.train, penalty, nu, config, nullptr, &state);
        state.theta = Eigen::MatrixXd(f.theta());
        state.xi = *f.xi_hat;
        result.cv_error[g] += prediction_error(state.theta, fold.test);
      }
    }
    for (double& e : result.cv_error) e /= static_cast<double>(n);
    result.lambda_best = base_grid[argmin_prefer_larger_lambda(result.cv_error)];
    return result;
  }

  // OST / HOST: tune the pilot APL stage first, then the final weighted stage
  // with the per-fold plug-ins held fixed at the selected pilot lambda.
  double lambda_pilot = config.lambda_pilot;
  if (lambda_pilot < 0.0) {
    result.pilot_lambdas = base_grid;
    apl_path_errors(folds, base_grid, config.penalty, cd_tol, &result.pilot_cv_error);
    for (double& e : result.pilot_cv_error) e /= static_cast<double>(n);
    lambda_pilot = base_grid[argmin_prefer_larger_lambda(result.pilot_cv_error)];
  }
  result.lambda_pilot_best = lambda_pilot;

  // Grid for the final stage from the full-data weighted problem.
  FitConfig probe = config;
  probe.lambda = 0.0;
  probe.lambda_pilot = lambda_pilot;
  std::vector<double> final_grid = opts.grid;
  {
    PenaltySpec pilot_penalty = adaptive_penalty(full_pilot_b, config.penalty, lambda_pilot);
    WlsOptions cd;
    cd.tol = cd_tol;
    Eigen::MatrixXd apl_theta =
        solve_penalized_wls(data.y_matrix(), data.x, ones, nullptr, pilot_penalty, cd).theta;
    const DenseTensor resid = residual_stack(data, theta_to_tensor(apl_theta, data.response_dims()));
    std::vector<Eigen::MatrixXd> invs;
    Eigen::VectorXd weights;
    if (config.method == Method::ost) {
      PluginResult plug = plugin_scale(resid, config.nu);
      invs = mode_inverses(plug.xi);
      weights = std::move(plug.weights);
    } else {
      weights = euclidean_weights(resid);
      invs = mode_inverses(host_sigma(resid, weights));
    }
    if (final_grid.empty()) {
      const double lmax = lambda_max(data.y_matrix(), data.x, weights, &invs, anchor);
      final_grid = lambda_grid(lmax, opts.grid_size, opts.grid_ratio);
    }
  }

  result.lambdas = final_grid;
  result.cv_error.assign(final_grid.size(), 0.0);
  for (const FoldSplit& fold : folds) {
    const Eigen::MatrixXd pilot = ols_theta(fold.train);
    const DenseTensor pilot_b = theta_to_tensor(pilot, fold.train.response_dims());
    PenaltySpec pilot_penalty = adaptive_penalty(pilot_b, config.penalty, lambda_pilot);
    WlsOptions cd;
    cd.tol = cd_tol;
    Eigen::MatrixXd apl_theta =
        solve_penalized_wls(fold.train.y_matrix(), fold.train.x, Eigen::VectorXd::Ones(fold.train.n_samples()),
                            nullptr, pilot_penalty, cd)
            .theta;
    const DenseTensor resid = residual_stack(fold.train, theta_to_tensor(apl_theta, fold.train.response_dims()));
    std::vector<Eigen::MatrixXd> invs;
    Eigen::VectorXd weights;
    if (config.method == Method::ost) {
      PluginResult plug = plugin_scale(resid, config.nu);
      invs = mode_inverses(plug.xi);
      weights = std::move(plug.weights);
    } else {
      weights = euclidean_weights(resid);
      invs = mode_inverses(host_sigma(resid, weights));
    }
    PenaltySpec penalty = adaptive_penalty(pilot_b, config.penalty, 0.0);
    Eigen::MatrixXd warm = apl_theta;
    for (std::size_t g = 0; g < final_grid.size(); ++g) {
      penalty.lambda = final_grid[g];
      cd.warm_start = &warm;
      warm = solve_penalized_wls(fold.train.y_matrix(), fold.train.x, weights, &invs, penalty, cd).theta;
      result.cv_error[g] += prediction_error(warm, fold.test);
    }
  }
  for (double& e : result.cv_error) e /= static_cast<double>(n);
  result.lambda_best = final_grid[argmin_prefer_larger_lambda(result.cv_error)];
  return result;
}

FitResult fit_cv(const Dataset& data, const FitConfig& config, const CvOptions& opts, CvResult* cv_out) {
  if (config.method == Method::ols) return fit_ols(data);
  if (config.method == Method::tols) return fit_tols(data, config.tols_level);
  CvResult cv = cross_validate(data, config, opts);
  FitConfig final_config = config;
  final_config.lambda = cv.lambda_best;
  if (config.method == Method::ost || config.method == Method::host) {
    final_config.lambda_pilot = cv.lambda_pilot_best;
  }
  FitResult fit_result = fit(data, final_config);
  if (cv_out != nullptr) *cv_out = std::move(cv);
  return fit_result;
}

}  // namespace ttr

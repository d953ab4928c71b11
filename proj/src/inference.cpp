#include "ttr/inference.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "ttr/special.hpp"

namespace ttr {

namespace {

// Decompose a linear index into vec(B) as (cell J, predictor k) with the cell
// index fastest, then into per-mode indices of the response cell.
struct CoefIndex {
  Index cell;
  Index predictor;
  std::vector<Index> mode_index;
};

std::vector<CoefIndex> decompose(const std::vector<Index>& active, const std::vector<Index>& mode_dims, Index p) {
  std::vector<CoefIndex> out;
  out.reserve(active.size());
  for (Index a : active) {
    CoefIndex ci;
    ci.cell = a % p;
    ci.predictor = a / p;
    Index rem = ci.cell;
    for (Index d : mode_dims) {
      ci.mode_index.push_back(rem % d);
      rem /= d;
    }
    out.push_back(std::move(ci));
  }
  return out;
}

// (Sigma_X kron A)[a, b] with A given through its mode factors.
Eigen::MatrixXd restricted_kron(const Eigen::MatrixXd& sigma_x, const std::vector<Eigen::MatrixXd>& mode_mats,
                                const std::vector<CoefIndex>& coords) {
  const std::size_t s = coords.size();
  Eigen::MatrixXd out(s, s);
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = a; b < s; ++b) {
      double cell = 1.0;
      for (std::size_t m = 0; m < mode_mats.size(); ++m) {
        cell *= mode_mats[m](coords[a].mode_index[m], coords[b].mode_index[m]);
      }
      const double v = sigma_x(coords[a].predictor, coords[b].predictor) * cell;
      out(a, b) = v;
      out(b, a) = v;
    }
  }
  return out;
}

Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw numerical_error(std::string(what) + " restriction is singular");
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

std::vector<CoefIndex> active_coords(const KroneckerScale& xi, const std::vector<Index>& active) {
  if (active.empty()) throw std::invalid_argument("active set is empty");
  return decompose(active, xi.dims(), xi.total_dim());
}

double nu_factor_n(double nu) {
  if (nu == kInfiniteDof) return 1.0;
  if (!(nu > 2.0)) throw std::invalid_argument("second moments require nu > 2");
  return nu / (nu - 2.0);
}

}  // namespace

AsymptoticCov cov_T(const Eigen::MatrixXd& sigma_x, const KroneckerScale& xi, double nu,
                    const std::vector<Index>& active) {
  const auto coords = active_coords(xi, active);
  const Eigen::MatrixXd q = restricted_kron(sigma_x, mode_inverses(xi), coords);
  const double p = static_cast<double>(xi.total_dim());
  const double factor = (nu == kInfiniteDof) ? 1.0 : (nu + p + 2.0) / (nu + p);
  AsymptoticCov out;
  out.v = factor * invert_spd(q, "information");
  out.flavor = CovFlavor::T;
  out.active = active;
  return out;
}

AsymptoticCov cov_N(const Eigen::MatrixXd& sigma_x, const KroneckerScale& xi, double nu,
                    const std::vector<Index>& active) {
  const auto coords = active_coords(xi, active);
  const Eigen::MatrixXd q = restricted_kron(sigma_x, mode_inverses(xi), coords);
  AsymptoticCov out;
  out.v = nu_factor_n(nu) * invert_spd(q, "information");
  out.flavor = CovFlavor::N;
  out.active = active;
  return out;
}

AsymptoticCov cov_L(const Eigen::MatrixXd& sigma_x, const KroneckerScale& xi, double nu,
                    const std::vector<Index>& active) {
  const auto coords = active_coords(xi, active);
  std::vector<Eigen::MatrixXd> identities;
  for (const auto& m : xi.modes) identities.push_back(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  const Eigen::MatrixXd gram = restricted_kron(sigma_x, identities, coords);
  const Eigen::MatrixXd mid = restricted_kron(sigma_x, xi.modes, coords);
  const Eigen::MatrixXd gram_inv = invert_spd(gram, "design");
  AsymptoticCov out;
  out.v = nu_factor_n(nu) * gram_inv * mid * gram_inv;
  out.v = 0.5 * (out.v + out.v.transpose());
  out.flavor = CovFlavor::L;
  out.active = active;
  return out;
}

AsymptoticCov cov_OST(const AsymptoticCov& v_t, const AsymptoticCov& v_l, double nu, Index p) {
  if (v_t.active != v_l.active) throw std::invalid_argument("covariances restrict different active sets");
  AsymptoticCov out;
  const double denom = (nu == kInfiniteDof) ? kInfiniteDof : (nu + static_cast<double>(p) + 2.0);
  const double w = (nu == kInfiniteDof) ? 0.0 : 4.0 / (denom * denom);
  out.v = v_t.v + w * (v_l.v - v_t.v);
  out.flavor = CovFlavor::OST;
  out.active = v_t.active;
  return out;
}

TestResult wald_test(const Eigen::VectorXd& b_active, const Eigen::VectorXd& b_null_active, const Hypothesis& h,
                     const AsymptoticCov& cov, Index n) {
  if (b_active.size() != static_cast<Index>(cov.active.size())) {
    throw std::invalid_argument("active coefficient count does not match the covariance restriction");
  }
  const Eigen::VectorXd delta = h.h(b_active) - h.h(b_null_active);
  const Eigen::MatrixXd jac = h.jacobian(b_active);
  if (jac.rows() != h.output_dim || jac.cols() != b_active.size()) {
    throw std::invalid_argument("jacobian must be k x |A|");
  }
  Eigen::MatrixXd mid = jac * cov.v * jac.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(mid);
  if (!lu.isInvertible()) throw numerical_error("restriction Jacobian is rank deficient");
  TestResult out;
  out.statistic = static_cast<double>(n) * delta.dot(lu.solve(delta));
  out.df = h.output_dim;
  out.p_value = chi_square_upper_tail(out.statistic, static_cast<double>(out.df));
  out.hypothesis = h.label;
  return out;
}

namespace {

struct FitInferenceContext {
  std::vector<Index> active;
  Eigen::VectorXd b_active;
  AsymptoticCov cov;
};

FitInferenceContext build_context(const FitResult& fit, const Dataset& data, CovFlavor flavor, double nu_override) {
  if (!fit.xi_hat.has_value()) throw std::invalid_argument("fit carries no scale estimate; inference unavailable");
  FitInferenceContext ctx;
  ctx.active = fit.active_set();
  if (ctx.active.empty()) throw std::invalid_argument("fit has an empty active set");
  ctx.b_active.resize(static_cast<Index>(ctx.active.size()));
  for (std::size_t a = 0; a < ctx.active.size(); ++a) ctx.b_active[static_cast<Index>(a)] = fit.b_hat[ctx.active[a]];

  const double nu = (nu_override > 0.0) ? nu_override : fit.nu_used;
  const Eigen::MatrixXd sigma_x = data.x * data.x.transpose() / static_cast<double>(data.n_samples());
  const KroneckerScale& xi = *fit.xi_hat;
  switch (flavor) {
    case CovFlavor::T:
      ctx.cov = cov_T(sigma_x, xi, nu, ctx.active);
      break;
    case CovFlavor::N:
      ctx.cov = cov_N(sigma_x, xi, nu, ctx.active);
      break;
    case CovFlavor::L:
      ctx.cov = cov_L(sigma_x, xi, nu, ctx.active);
      break;
    case CovFlavor::OST:
      ctx.cov = cov_OST(cov_T(sigma_x, xi, nu, ctx.active), cov_L(sigma_x, xi, nu, ctx.active), nu,
                        xi.total_dim());
      break;
  }
  return ctx;
}

}  // namespace

TestResult wald_test_coordinate(const FitResult& fit, const Dataset& data, Index linear_coefficient, double value,
                                CovFlavor flavor, double nu_override) {
  FitInferenceContext ctx = build_context(fit, data, flavor, nu_override);
  const auto pos = std::find(ctx.active.begin(), ctx.active.end(), linear_coefficient);
  if (pos == ctx.active.end()) {
    throw std::invalid_argument("coefficient was estimated exactly zero; test unavailable for it");
  }
  const Index a = static_cast<Index>(pos - ctx.active.begin());

  Hypothesis h;
  h.output_dim = 1;
  h.label = "b[" + std::to_string(linear_coefficient) + "] == " + std::to_string(value);
  h.h = [a](const Eigen::VectorXd& b) { return Eigen::VectorXd::Constant(1, b[a]); };
  h.jacobian = [a](const Eigen::VectorXd& b) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(1, b.size());
    j(0, a) = 1.0;
    return j;
  };

  Eigen::VectorXd b_null = ctx.b_active;
  b_null[a] = value;
  return wald_test(ctx.b_active, b_null, h, ctx.cov, data.n_samples());
}

ConfidenceInterval confidence_interval(const FitResult& fit, const Dataset& data, Index linear_coefficient,
                                       double level, CovFlavor flavor, double nu_override) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must be in (0,1)");
  FitInferenceContext ctx = build_context(fit, data, flavor, nu_override);
  const auto pos = std::find(ctx.active.begin(), ctx.active.end(), linear_coefficient);
  if (pos == ctx.active.end()) {
    throw std::invalid_argument("coefficient was estimated exactly zero; interval unavailable for it");
  }
  const Index a = static_cast<Index>(pos - ctx.active.begin());
  const double v = ctx.cov.v(a, a);
  if (!(v > 0.0)) throw numerical_error("degenerate variance estimate");
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double half = z * std::sqrt(v / static_cast<double>(data.n_samples()));
  return {ctx.b_active[a] - half, ctx.b_active[a] + half, level};
}

}  // namespace ttr

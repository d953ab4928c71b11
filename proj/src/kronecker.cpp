#include "ttr/kronecker.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace ttr {

std::vector<Index> KroneckerScale::dims() const {
  std::vector<Index> d;
  d.reserve(modes.size());
  for (const auto& m : modes) d.push_back(m.rows());
  return d;
}

Index KroneckerScale::total_dim() const {
  Index p = 1;
  for (const auto& m : modes) p *= m.rows();
  return p;
}

KroneckerScale identity_scale(const std::vector<Index>& dims) {
  KroneckerScale xi;
  xi.modes.reserve(dims.size());
  for (Index d : dims) xi.modes.push_back(Eigen::MatrixXd::Identity(d, d));
  xi.normalized = true;
  return xi;
}

void validate_spd(const KroneckerScale& xi) {
  if (xi.modes.empty()) throw std::invalid_argument("scale must have at least one mode");
  for (std::size_t m = 0; m < xi.modes.size(); ++m) {
    const auto& s = xi.modes[m];
    if (s.rows() != s.cols()) throw std::invalid_argument("mode matrix must be square");
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("mode matrix is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("mode matrix " + std::to_string(m) + " is not positive definite");
    }
  }
}

Eigen::MatrixXd ar_matrix(Index p, double rho) {
  if (std::abs(rho) >= 1.0) throw std::invalid_argument("AR correlation must satisfy |rho| < 1");
  Eigen::MatrixXd out(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      out(i, j) = std::pow(rho, std::abs(static_cast<double>(i - j)));
    }
  }
  return out;
}

KroneckerScale normalize(const KroneckerScale& xi) {
  KroneckerScale out = xi;
  const std::size_t m_count = out.modes.size();
  double carried = 1.0;
  for (std::size_t m = 0; m + 1 < m_count; ++m) {
    const double head = out.modes[m](0, 0);
    if (!(head > 0.0)) throw numerical_error("cannot normalize: leading element is not positive");
    out.modes[m] /= head;
    carried *= head;
  }
  out.modes[m_count - 1] *= carried;
  out.normalized = true;
  return out;
}

std::vector<Eigen::MatrixXd> mode_inverses(const KroneckerScale& xi) {
  std::vector<Eigen::MatrixXd> invs;
  invs.reserve(xi.modes.size());
  for (std::size_t m = 0; m < xi.modes.size(); ++m) {
    const auto& s = xi.modes[m];
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("mode matrix " + std::to_string(m) + " is not positive definite");
    }
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
    invs.push_back(0.5 * (inv + inv.transpose()));
  }
  return invs;
}

double kron_log_det(const KroneckerScale& xi) {
  const Index p = xi.total_dim();
  double out = 0.0;
  for (const auto& s : xi.modes) {
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) throw numerical_error("mode matrix is not positive definite");
    double ld = 0.0;
    for (Index i = 0; i < s.rows(); ++i) ld += std::log(llt.matrixL()(i, i));
    out += 2.0 * ld * static_cast<double>(p / s.rows());
  }
  return out;
}

std::vector<Eigen::MatrixXd> mode_sqrts(const KroneckerScale& xi) {
  std::vector<Eigen::MatrixXd> roots;
  roots.reserve(xi.modes.size());
  for (const auto& s : xi.modes) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
      throw numerical_error("mode matrix is not positive definite");
    }
    roots.push_back(es.operatorSqrt());
  }
  return roots;
}

double mahalanobis_sq(const DenseTensor& d, const KroneckerScale& xi) {
  return mahalanobis_sq(d, mode_inverses(xi));
}

double mahalanobis_sq(const DenseTensor& d, const std::vector<Eigen::MatrixXd>& mode_invs) {
  DenseTensor t = tucker(d, mode_invs);
  return t.as_vector().dot(d.as_vector());
}

Eigen::VectorXd mahalanobis_sq_stacked(const DenseTensor& stack, const std::vector<Eigen::MatrixXd>& mode_invs) {
  const Index m_count = static_cast<Index>(mode_invs.size());
  DenseTensor t = tucker_leading(stack, mode_invs, m_count);
  const Index n = stack.dim(stack.order() - 1);
  const Index p = stack.size() / n;
  Eigen::Map<const Eigen::MatrixXd> a(stack.data(), p, n);
  Eigen::Map<const Eigen::MatrixXd> b(t.data(), p, n);
  return (a.array() * b.array()).colwise().sum().transpose();
}

Eigen::MatrixXd kron_materialize(const KroneckerScale& xi, Index cap) {
  const Index p = xi.total_dim();
  if (p > cap) throw std::invalid_argument("materialization cap exceeded");
  Eigen::MatrixXd out = xi.modes.front();
  for (std::size_t m = 1; m < xi.modes.size(); ++m) {
    const Eigen::MatrixXd& s = xi.modes[m];
    Eigen::MatrixXd next(out.rows() * s.rows(), out.cols() * s.cols());
    for (Index i = 0; i < s.rows(); ++i) {
      for (Index j = 0; j < s.cols(); ++j) {
        next.block(i * out.rows(), j * out.cols(), out.rows(), out.cols()) = s(i, j) * out;
      }
    }
    out = std::move(next);
  }
  return out;
}

Eigen::VectorXd kron_column(const std::vector<Eigen::MatrixXd>& mats, Index linear) {
  Eigen::VectorXd col = Eigen::VectorXd::Ones(1);
  Index rem = linear;
  for (const auto& s : mats) {
    const Index pm = s.rows();
    const Index jm = rem % pm;
    rem /= pm;
    Eigen::VectorXd next(col.size() * pm);
    for (Index i = 0; i < pm; ++i) next.segment(i * col.size(), col.size()) = s(i, jm) * col;
    col = std::move(next);
  }
  return col;
}

Eigen::VectorXd kron_diagonal(const std::vector<Eigen::MatrixXd>& mats) {
  Eigen::VectorXd diag = Eigen::VectorXd::Ones(1);
  for (const auto& s : mats) {
    const Index pm = s.rows();
    Eigen::VectorXd next(diag.size() * pm);
    for (Index i = 0; i < pm; ++i) next.segment(i * diag.size(), diag.size()) = s(i, i) * diag;
    diag = std::move(next);
  }
  return diag;
}

}  // namespace ttr

#pragma once

#include <functional>
#include <string>

#include "ttr/estimators.hpp"

namespace ttr {

enum class CovFlavor { L, N, T, OST };

/// Asymptotic covariance of sqrt(n) * vec(B_hat_A - B_A) restricted to an
/// active set A of linear indices into vec(B) (response cell fastest,
/// predictor slowest).
struct AsymptoticCov {
  Eigen::MatrixXd v;
  CovFlavor flavor = CovFlavor::OST;
  std::vector<Index> active;
};

/// Entries of (Sigma_X kron Sigma^{-1}) restricted to the active set, built
/// from the mode matrices without materializing the p x p Kronecker product.
AsymptoticCov cov_T(const Eigen::MatrixXd& sigma_x, const KroneckerScale& xi, double nu,
                    const std::vector<Index>& active);
AsymptoticCov cov_N(const Eigen::MatrixXd& sigma_x, const KroneckerScale& xi, double nu,
                    const std::vector<Index>& active);
AsymptoticCov cov_L(const Eigen::MatrixXd& sigma_x, const KroneckerScale& xi, double nu,
                    const std::vector<Index>& active);

/// V = V_T + 4 (V_L - V_T) / (nu + p + 2)^2.
AsymptoticCov cov_OST(const AsymptoticCov& v_t, const AsymptoticCov& v_l, double nu, Index p);

struct TestResult {
  double statistic = 0.0;
  Index df = 0;
  double p_value = 1.0;
  std::string hypothesis;
};

/// Differentiable restriction h with its Jacobian dh/db (k x s).
struct Hypothesis {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> h;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  Index output_dim = 1;
  std::string label;
};

/// Wald statistic T = n * (h(b_hat) - h(b*))^T (J V J^T)^{-1} (h(b_hat) - h(b*)),
/// chi-square_k under the null.
TestResult wald_test(const Eigen::VectorXd& b_active, const Eigen::VectorXd& b_null_active, const Hypothesis& h,
                     const AsymptoticCov& cov, Index n);

/// Convenience wrapper: tests b[coord] == value for a fitted model, using the
/// fit's estimated active set, scale, and degrees of freedom (override with
/// nu > 0).  Throws when the coordinate was estimated exactly zero.
TestResult wald_test_coordinate(const FitResult& fit, const Dataset& data, Index linear_coefficient, double value,
                                CovFlavor flavor = CovFlavor::OST, double nu_override = -1.0);

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
};

ConfidenceInterval confidence_interval(const FitResult& fit, const Dataset& data, Index linear_coefficient,
                                       double level = 0.95, CovFlavor flavor = CovFlavor::OST,
                                       double nu_override = -1.0);

}  // namespace ttr

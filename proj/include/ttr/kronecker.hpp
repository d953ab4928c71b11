#pragma once

#include <vector>

#include <Eigen/Core>

#include "ttr/tensor.hpp"

namespace ttr {

/// Raised when a matrix that must be symmetric positive definite fails the
/// Cholesky factorization (or a related numerical contract breaks).
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kronecker-separable scale: an ordered list of per-mode SPD matrices
/// Sigma_0, ..., Sigma_{M-1}.  The distribution only identifies their
/// Kronecker product Sigma_{M-1} (x) ... (x) Sigma_0; the normalized form
/// fixes Sigma_m(0,0) = 1 for m < M-1 and pushes the scale into the last
/// mode.
struct KroneckerScale {
  std::vector<Eigen::MatrixXd> modes;
  bool normalized = false;

  Index order() const { return static_cast<Index>(modes.size()); }
  std::vector<Index> dims() const;
  Index total_dim() const;
};

KroneckerScale identity_scale(const std::vector<Index>& dims);

/// Throws std::invalid_argument on asymmetry (tolerance 1e-12) and
/// numerical_error when a mode matrix is not positive definite.
void validate_spd(const KroneckerScale& xi);

/// AR(1) correlation matrix with entries rho^|i-j|; requires |rho| < 1.
Eigen::MatrixXd ar_matrix(Index p, double rho);

/// Rescales the modes so Sigma_m(0,0) = 1 for all but the last mode, leaving
/// the Kronecker product unchanged.
KroneckerScale normalize(const KroneckerScale& xi);

/// Per-mode inverses computed through Cholesky; throws numerical_error when a
/// mode is not SPD.
std::vector<Eigen::MatrixXd> mode_inverses(const KroneckerScale& xi);

/// Sum over modes of p_{-m} * log|Sigma_m| = log|Sigma_{M-1} (x) ... (x) Sigma_0|.
double kron_log_det(const KroneckerScale& xi);

/// Symmetric square roots Sigma_m^{1/2} via eigendecomposition.
std::vector<Eigen::MatrixXd> mode_sqrts(const KroneckerScale& xi);

/// Squared tensor Mahalanobis norm vec(d)^T (kron of inverses) vec(d),
/// evaluated through mode products; never materializes the full Kronecker
/// matrix.
double mahalanobis_sq(const DenseTensor& d, const KroneckerScale& xi);

/// Same quadratic form against precomputed mode inverses.
double mahalanobis_sq(const DenseTensor& d, const std::vector<Eigen::MatrixXd>& mode_invs);

/// Per-sample squared Mahalanobis norms of a stacked tensor (last mode is the
/// sample index).
Eigen::VectorXd mahalanobis_sq_stacked(const DenseTensor& stack, const std::vector<Eigen::MatrixXd>& mode_invs);

/// Full Kronecker product Sigma_{M-1} (x) ... (x) Sigma_0.  Test support for
/// small dimensions only: refuses to materialize beyond `cap` rows.
Eigen::MatrixXd kron_materialize(const KroneckerScale& xi, Index cap = 4096);

/// Column `linear` of the materialized Kronecker product of `mats`, assembled
/// from one column of each factor in O(p).
Eigen::VectorXd kron_column(const std::vector<Eigen::MatrixXd>& mats, Index linear);

/// Diagonal of the Kronecker product of `mats` as a flat vector.
Eigen::VectorXd kron_diagonal(const std::vector<Eigen::MatrixXd>& mats);

}  // namespace ttr

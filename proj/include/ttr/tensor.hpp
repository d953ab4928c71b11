#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace ttr {

using Index = Eigen::Index;

/// Dense M-way array of doubles in generalized column-major order: the first
/// index varies fastest, so element (i_0,...,i_{M-1}) sits at linear offset
/// i_0 + i_1*p_0 + i_2*p_0*p_1 + ...  Vectorization is a plain copy of the
/// underlying buffer.
class DenseTensor {
 public:
  DenseTensor() = default;

  explicit DenseTensor(std::vector<Index> dims);
  DenseTensor(std::vector<Index> dims, std::vector<double> values);

  Index order() const { return static_cast<Index>(dims_.size()); }
  const std::vector<Index>& dims() const { return dims_; }
  Index dim(Index m) const { return dims_.at(static_cast<std::size_t>(m)); }
  Index size() const { return static_cast<Index>(values_.size()); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& operator[](Index linear) { return values_[static_cast<std::size_t>(linear)]; }
  double operator[](Index linear) const { return values_[static_cast<std::size_t>(linear)]; }

  double& at(std::span<const Index> multi_index) { return values_[static_cast<std::size_t>(offset(multi_index))]; }
  double at(std::span<const Index> multi_index) const { return values_[static_cast<std::size_t>(offset(multi_index))]; }

  /// Linear offset of a 0-based multi-index.
  Index offset(std::span<const Index> multi_index) const;

  Eigen::Map<Eigen::VectorXd> as_vector() { return {values_.data(), size()}; }
  Eigen::Map<const Eigen::VectorXd> as_vector() const { return {values_.data(), size()}; }

  void setZero();
  double squared_norm() const;

  bool same_dims(const DenseTensor& other) const { return dims_ == other.dims_; }

 private:
  std::vector<Index> dims_;
  std::vector<double> values_;
};

Index product(std::span<const Index> dims);

/// vec(A): copies the buffer out (the storage order is already the
/// vectorization order).
Eigen::VectorXd vectorize(const DenseTensor& a);

/// Inverse of vectorize for the given dimension vector.
DenseTensor devectorize(const Eigen::VectorXd& v, std::vector<Index> dims);

/// Mode-n matricization A_(n): p_n x prod_{k != n} p_k.  Column j of the
/// result enumerates the remaining indices in column-major order.
Eigen::MatrixXd matricize(const DenseTensor& a, Index mode);

/// Refold a mode-n matricization back into a tensor with the given dims.
DenseTensor dematricize(const Eigen::MatrixXd& mat, std::vector<Index> dims, Index mode);

/// Mode-n product A x_n G with G of shape s x p_n; the result replaces the
/// n-th dimension with s.  Satisfies matricize(result, n) = G * matricize(a, n).
DenseTensor mode_product(const DenseTensor& a, const Eigen::MatrixXd& g, Index mode);

/// Contraction of mode n with a vector of length p_n; the result drops that
/// mode (an order-1 tensor contracts to a single-element tensor of order 1 is
/// not representable, so order M >= 2 contracts to order M-1 and M == 1
/// yields a 1-element tensor of order 1).
DenseTensor mode_vec_product(const DenseTensor& a, const Eigen::VectorXd& c, Index mode);

/// Tucker product [[A; G_0, ..., G_{K-1}]] applied to modes 0..K-1 (K <= M).
DenseTensor tucker(const DenseTensor& a, std::span<const Eigen::MatrixXd> factors);

/// Tucker product restricted to the first `n_modes` modes of a stacked tensor
/// (last mode holds the sample index and is left untouched).
DenseTensor tucker_leading(const DenseTensor& stack, std::span<const Eigen::MatrixXd> factors, Index n_modes);

}  // namespace ttr

#pragma once

#include <span>

#include <Eigen/Core>

#include "ttr/tensor.hpp"

namespace ttr {

/// Paired regression data: predictors X (q x n) and the response stack Y with
/// dims p_1 x ... x p_M x n (sample index last, so each vec(Y_i) is a
/// contiguous column of the stacked buffer).
struct Dataset {
  Eigen::MatrixXd x;
  DenseTensor y;
  bool centered = false;

  Index n_samples() const { return x.cols(); }
  Index n_predictors() const { return x.rows(); }
  std::vector<Index> response_dims() const;
  Index response_size() const;

  /// p x n view of the stacked responses.
  Eigen::Map<const Eigen::MatrixXd> y_matrix() const;

  void validate() const;
};

Dataset subset(const Dataset& data, std::span<const Index> samples);

/// Fitted stack B xbar_{M+1} X_i for all samples at once: dims p_1..p_M x n.
DenseTensor fitted_stack(const DenseTensor& b, const Eigen::MatrixXd& x);

/// Y - fitted stack.
DenseTensor residual_stack(const Dataset& data, const DenseTensor& b);

}  // namespace ttr

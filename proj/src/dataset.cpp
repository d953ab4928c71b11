#include "ttr/dataset.hpp"

namespace ttr {

std::vector<Index> Dataset::response_dims() const {
  std::vector<Index> d = y.dims();
  d.pop_back();
  return d;
}

Index Dataset::response_size() const { return y.size() / y.dim(y.order() - 1); }

Eigen::Map<const Eigen::MatrixXd> Dataset::y_matrix() const {
  const Index n = y.dim(y.order() - 1);
  return {y.data(), y.size() / n, n};
}

void Dataset::validate() const {
  if (y.order() < 2) throw std::invalid_argument("response stack must carry a sample mode");
  if (x.cols() != y.dim(y.order() - 1)) throw std::invalid_argument("sample counts of X and Y disagree");
  if (x.rows() < 1) throw std::invalid_argument("X must have at least one predictor");
}

Dataset subset(const Dataset& data, std::span<const Index> samples) {
  const Index n_sub = static_cast<Index>(samples.size());
  const Index p = data.response_size();
  Dataset out;
  out.x.resize(data.x.rows(), n_sub);
  std::vector<Index> dims = data.response_dims();
  dims.push_back(n_sub);
  out.y = DenseTensor(std::move(dims));
  auto ymat = data.y_matrix();
  Eigen::Map<Eigen::MatrixXd> ysub(out.y.data(), p, n_sub);
  for (Index j = 0; j < n_sub; ++j) {
    out.x.col(j) = data.x.col(samples[j]);
    ysub.col(j) = ymat.col(samples[j]);
  }
  out.centered = data.centered;
  return out;
}

DenseTensor fitted_stack(const DenseTensor& b, const Eigen::MatrixXd& x) {
  // B has dims p_1..p_M x q; contracting the trailing mode against each X_i
  // is one mode product with X^T (n x q).
  return mode_product(b, x.transpose(), b.order() - 1);
}

DenseTensor residual_stack(const Dataset& data, const DenseTensor& b) {
  DenseTensor fit = fitted_stack(b, data.x);
  DenseTensor out = data.y;
  out.as_vector() -= fit.as_vector();
  return out;
}

}  // namespace ttr

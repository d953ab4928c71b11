#include "ttr/tensor.hpp"

#include <numeric>

namespace ttr {

namespace {

void check_dims(const std::vector<Index>& dims) {
  if (dims.empty()) throw std::invalid_argument("tensor must have order >= 1");
  for (Index d : dims) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
  }
}

}  // namespace

DenseTensor::DenseTensor(std::vector<Index> dims) : dims_(std::move(dims)) {
  check_dims(dims_);
  values_.assign(static_cast<std::size_t>(product(dims_)), 0.0);
}

DenseTensor::DenseTensor(std::vector<Index> dims, std::vector<double> values)
    : dims_(std::move(dims)), values_(std::move(values)) {
  check_dims(dims_);
  if (static_cast<Index>(values_.size()) != product(dims_)) {
    throw std::invalid_argument("value count does not match dimension product");
  }
}

Index DenseTensor::offset(std::span<const Index> multi_index) const {
  if (multi_index.size() != dims_.size()) throw std::invalid_argument("multi-index order mismatch");
  Index off = 0;
  Index stride = 1;
  for (std::size_t m = 0; m < dims_.size(); ++m) {
    const Index i = multi_index[m];
    if (i < 0 || i >= dims_[m]) throw std::out_of_range("tensor index out of range");
    off += i * stride;
    stride *= dims_[m];
  }
  return off;
}

void DenseTensor::setZero() { std::fill(values_.begin(), values_.end(), 0.0); }

double DenseTensor::squared_norm() const { return as_vector().squaredNorm(); }

Index product(std::span<const Index> dims) {
  return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<Index>());
}

Eigen::VectorXd vectorize(const DenseTensor& a) { return a.as_vector(); }

DenseTensor devectorize(const Eigen::VectorXd& v, std::vector<Index> dims) {
  return DenseTensor(std::move(dims), std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::MatrixXd matricize(const DenseTensor& a, Index mode) {
  const Index m_count = a.order();
  if (mode < 0 || mode >= m_count) throw std::out_of_range("matricization mode out of range");
  const Index pn = a.dim(mode);
  const Index rest = a.size() / pn;
  Eigen::MatrixXd out(pn, rest);

  // The buffer factors as (lt, pn, gt) in column-major order, where lt is the
  // product of dims before the mode and gt the product after.  Column index
  // of A_(n) is l + g*lt for in-slab position l and slab g.
  Index lt = 1;
  for (Index m = 0; m < mode; ++m) lt *= a.dim(m);
  const Index gt = a.size() / (lt * pn);

  const double* src = a.data();
  for (Index g = 0; g < gt; ++g) {
    for (Index i = 0; i < pn; ++i) {
      const double* col = src + (g * pn + i) * lt;
      for (Index l = 0; l < lt; ++l) {
        out(i, g * lt + l) = col[l];
      }
    }
  }
  return out;
}

DenseTensor dematricize(const Eigen::MatrixXd& mat, std::vector<Index> dims, Index mode) {
  DenseTensor out(std::move(dims));
  const Index m_count = out.order();
  if (mode < 0 || mode >= m_count) throw std::out_of_range("matricization mode out of range");
  const Index pn = out.dim(mode);
  if (mat.rows() != pn || mat.cols() != out.size() / pn) {
    throw std::invalid_argument("matrix shape does not match target dims");
  }
  Index lt = 1;
  for (Index m = 0; m < mode; ++m) lt *= out.dim(m);
  const Index gt = out.size() / (lt * pn);

  double* dst = out.data();
  for (Index g = 0; g < gt; ++g) {
    for (Index i = 0; i < pn; ++i) {
      double* col = dst + (g * pn + i) * lt;
      for (Index l = 0; l < lt; ++l) {
        col[l] = mat(i, g * lt + l);
      }
    }
  }
  return out;
}

DenseTensor mode_product(const DenseTensor& a, const Eigen::MatrixXd& g, Index mode) {
  const Index m_count = a.order();
  if (mode < 0 || mode >= m_count) throw std::out_of_range("mode-product mode out of range");
  const Index pn = a.dim(mode);
  if (g.cols() != pn) throw std::invalid_argument("factor column count must equal the mode dimension");
  const Index s = g.rows();

  std::vector<Index> out_dims = a.dims();
  out_dims[static_cast<std::size_t>(mode)] = s;
  DenseTensor out(std::move(out_dims));

  Index lt = 1;
  for (Index m = 0; m < mode; ++m) lt *= a.dim(m);
  const Index gt = a.size() / (lt * pn);

  // Each slab g is a contiguous lt x pn column-major block; the product is
  // slab * g^T done as one GEMM per slab.
  for (Index blk = 0; blk < gt; ++blk) {
    Eigen::Map<const Eigen::MatrixXd> src(a.data() + blk * lt * pn, lt, pn);
    Eigen::Map<Eigen::MatrixXd> dst(out.data() + blk * lt * s, lt, s);
    dst.noalias() = src * g.transpose();
  }
  return out;
}

DenseTensor mode_vec_product(const DenseTensor& a, const Eigen::VectorXd& c, Index mode) {
  const Index m_count = a.order();
  if (mode < 0 || mode >= m_count) throw std::out_of_range("mode-product mode out of range");
  if (c.size() != a.dim(mode)) throw std::invalid_argument("vector length must equal the mode dimension");

  DenseTensor contracted = mode_product(a, c.transpose(), mode);
  if (m_count == 1) return contracted;  // single-element order-1 tensor

  std::vector<Index> out_dims;
  out_dims.reserve(static_cast<std::size_t>(m_count - 1));
  for (Index m = 0; m < m_count; ++m) {
    if (m != mode) out_dims.push_back(a.dim(m));
  }
  return DenseTensor(std::move(out_dims), std::move(contracted.values()));
}

DenseTensor tucker(const DenseTensor& a, std::span<const Eigen::MatrixXd> factors) {
  if (static_cast<Index>(factors.size()) > a.order()) {
    throw std::invalid_argument("more factors than tensor modes");
  }
  DenseTensor out = a;
  for (std::size_t m = 0; m < factors.size(); ++m) {
    out = mode_product(out, factors[m], static_cast<Index>(m));
  }
  return out;
}

DenseTensor tucker_leading(const DenseTensor& stack, std::span<const Eigen::MatrixXd> factors, Index n_modes) {
  if (static_cast<Index>(factors.size()) != n_modes || n_modes >= stack.order()) {
    throw std::invalid_argument("factor count must match the leading mode count");
  }
  DenseTensor out = stack;
  for (Index m = 0; m < n_modes; ++m) {
    out = mode_product(out, factors[static_cast<std::size_t>(m)], m);
  }
  return out;
}

}  // namespace ttr

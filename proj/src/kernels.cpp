#include "gcnrobust/kernels.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

namespace gcnrobust::kernels {

namespace {

void check_dims(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("dimension mismatch in ") + what);
}

inline double entry_scale(std::span<const double> scale, std::size_t k) {
  return scale.empty() ? 1.0 : scale[k];
}

// Row kernels shared by the serial and OpenMP drivers so the arithmetic
// order is identical. Narrow outputs (hidden units, classes) get a
// compile-time width; Width == 0 is the general case.
template <int Width>
inline void axpy(double* __restrict dst, double a, const double* __restrict src, Eigen::Index n) {
  if constexpr (Width > 0) {
    for (int j = 0; j < Width; ++j) dst[j] += a * src[j];
  } else {
    for (Eigen::Index j = 0; j < n; ++j) dst[j] += a * src[j];
  }
}

template <int Width>
void spmm_row(const NormalizedAdjacency& a, const Matrix& dense, Matrix& out, NodeId i) {
  const Eigen::Index n = dense.cols();
  double* dst = out.data() + static_cast<Eigen::Index>(i) * n;
  std::fill(dst, dst + n, 0.0);
  for (std::size_t k = a.offsets[i]; k < a.offsets[i + 1]; ++k) {
    axpy<Width>(dst, a.values[k], dense.data() + static_cast<Eigen::Index>(a.columns[k]) * n, n);
  }
}

template <int Width>
void feature_row(const FeatureMatrix& x, std::span<const double> scale, const Matrix& w, Matrix& out, NodeId i) {
  const Eigen::Index n = w.cols();
  double* dst = out.data() + static_cast<Eigen::Index>(i) * n;
  std::fill(dst, dst + n, 0.0);
  const std::size_t base = x.row_offsets()[i];
  auto cols = x.row(i);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    axpy<Width>(dst, entry_scale(scale, base + k), w.data() + static_cast<Eigen::Index>(cols[k]) * n, n);
  }
}

template <int Width>
void feature_transpose_row(const FeatureMatrix& x, std::span<const double> scale, const Matrix& g, Matrix& out,
                           FeatureId f) {
  const Eigen::Index n = g.cols();
  double* dst = out.data() + static_cast<Eigen::Index>(f) * n;
  std::fill(dst, dst + n, 0.0);
  auto nodes = x.column(f);
  auto entry = x.column_entry_index(f);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    axpy<Width>(dst, entry_scale(scale, entry[k]), g.data() + static_cast<Eigen::Index>(nodes[k]) * n, n);
  }
}

constexpr int kMaxFixedWidth = 16;

// Calls body(std::integral_constant<int, W>{}) with W = n for 1 <= n <= 16,
// W = 0 otherwise.
template <typename Body, int... W>
void with_width_impl(Eigen::Index n, Body&& body, std::integer_sequence<int, W...>) {
  const bool fixed = ((n == W + 1 ? (body(std::integral_constant<int, W + 1>{}), true) : false) || ...);
  if (!fixed) body(std::integral_constant<int, 0>{});
}

template <typename Body>
void with_width(Eigen::Index n, Body&& body) {
  with_width_impl(n, body, std::make_integer_sequence<int, kMaxFixedWidth>{});
}

void check_scale(const FeatureMatrix& x, std::span<const double> scale) {
  check_dims(scale.empty() || scale.size() == x.nnz(), "feature scale");
}

}  // namespace

namespace serial {

Matrix spmm(const NormalizedAdjacency& a, const Matrix& dense) {
  check_dims(dense.rows() == a.n, "spmm");
  Matrix out(a.n, dense.cols());
  with_width(dense.cols(), [&](auto w) {
    for (NodeId i = 0; i < a.n; ++i) spmm_row<w>(a, dense, out, i);
  });
  return out;
}

Matrix feature_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& w) {
  check_dims(w.rows() == x.cols(), "feature_product");
  check_scale(x, scale);
  Matrix out(x.rows(), w.cols());
  with_width(w.cols(), [&](auto width) {
    for (NodeId i = 0; i < x.rows(); ++i) feature_row<width>(x, scale, w, out, i);
  });
  return out;
}

Matrix feature_transpose_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& g) {
  check_dims(g.rows() == x.rows(), "feature_transpose_product");
  check_scale(x, scale);
  Matrix out(x.cols(), g.cols());
  with_width(g.cols(), [&](auto w) {
    for (FeatureId f = 0; f < x.cols(); ++f) feature_transpose_row<w>(x, scale, g, out, f);
  });
  return out;
}

}  // namespace serial

namespace omp {

Matrix spmm(const NormalizedAdjacency& a, const Matrix& dense) {
  check_dims(dense.rows() == a.n, "spmm");
  Matrix out(a.n, dense.cols());
  with_width(dense.cols(), [&](auto w) {
#pragma omp parallel for schedule(dynamic, 64)
    for (NodeId i = 0; i < a.n; ++i) spmm_row<w>(a, dense, out, i);
  });
  return out;
}

Matrix feature_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& w) {
  check_dims(w.rows() == x.cols(), "feature_product");
  check_scale(x, scale);
  Matrix out(x.rows(), w.cols());
  with_width(w.cols(), [&](auto width) {
#pragma omp parallel for schedule(dynamic, 64)
    for (NodeId i = 0; i < x.rows(); ++i) feature_row<width>(x, scale, w, out, i);
  });
  return out;
}

Matrix feature_transpose_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& g) {
  check_dims(g.rows() == x.rows(), "feature_transpose_product");
  check_scale(x, scale);
  Matrix out(x.cols(), g.cols());
  with_width(g.cols(), [&](auto w) {
#pragma omp parallel for schedule(dynamic, 4)
    for (FeatureId f = 0; f < x.cols(); ++f) feature_transpose_row<w>(x, scale, g, out, f);
  });
  return out;
}

}  // namespace omp

Matrix spmm(const NormalizedAdjacency& a, const Matrix& dense, Exec exec) {
  return exec == Exec::Parallel ? omp::spmm(a, dense) : serial::spmm(a, dense);
}

Matrix feature_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& w, Exec exec) {
  return exec == Exec::Parallel ? omp::feature_product(x, scale, w) : serial::feature_product(x, scale, w);
}

Matrix feature_transpose_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& g,
                                 Exec exec) {
  return exec == Exec::Parallel ? omp::feature_transpose_product(x, scale, g)
                                : serial::feature_transpose_product(x, scale, g);
}

}  // namespace gcnrobust::kernels

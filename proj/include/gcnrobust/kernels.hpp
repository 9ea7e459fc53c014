#pragma once

#include <span>

#include "gcnrobust/features.hpp"
#include "gcnrobust/graph.hpp"
#include "gcnrobust/types.hpp"

namespace gcnrobust {

/// Selects the OpenMP kernels or their serial reference versions. Both
/// produce bit-identical results: parallel loops only split independent
/// output rows, never a reduction.
enum class Exec { Serial, Parallel };

namespace kernels {

/// out = A * dense
Matrix spmm(const NormalizedAdjacency& a, const Matrix& dense, Exec exec = Exec::Parallel);

/// out = X_s * w, where X_s is X with entry k scaled by scale[k] (row-major
/// entry order). An empty `scale` means all ones.
Matrix feature_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& w,
                       Exec exec = Exec::Parallel);

/// out = X_s^T * g
Matrix feature_transpose_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& g,
                                 Exec exec = Exec::Parallel);

namespace serial {
Matrix spmm(const NormalizedAdjacency& a, const Matrix& dense);
Matrix feature_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& w);
Matrix feature_transpose_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& g);
}  // namespace serial

namespace omp {
Matrix spmm(const NormalizedAdjacency& a, const Matrix& dense);
Matrix feature_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& w);
Matrix feature_transpose_product(const FeatureMatrix& x, std::span<const double> scale, const Matrix& g);
}  // namespace omp

}  // namespace kernels
}  // namespace gcnrobust

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "gcnrobust/types.hpp"

namespace gcnrobust {

using FeatureEntry = std::pair<NodeId, FeatureId>;

/// Binary N x d matrix stored as sorted per-row column lists, with the
/// transposed layout kept alongside for X^T products.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  /// Duplicate entries are merged. Throws std::out_of_range on bad indices.
  FeatureMatrix(NodeId n_rows, FeatureId n_cols, std::span<const FeatureEntry> ones);

  static FeatureMatrix all_ones(NodeId n_rows, FeatureId n_cols);

  NodeId rows() const { return n_rows_; }
  FeatureId cols() const { return n_cols_; }
  std::size_t nnz() const { return row_cols_.size(); }

  std::span<const FeatureId> row(NodeId u) const {
    return {row_cols_.data() + row_offsets_[u], row_offsets_[u + 1] - row_offsets_[u]};
  }
  std::span<const NodeId> column(FeatureId f) const {
    return {col_rows_.data() + col_offsets_[f], col_offsets_[f + 1] - col_offsets_[f]};
  }
  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  /// For each entry of column(f), its position in row-major entry order.
  std::span<const std::size_t> column_entry_index(FeatureId f) const {
    return {col_entry_.data() + col_offsets_[f], col_offsets_[f + 1] - col_offsets_[f]};
  }

  bool has(NodeId u, FeatureId f) const;

  /// Number of features shared by rows u and v.
  std::size_t overlap(NodeId u, NodeId v) const;

  /// Copy with entry (u, f) cleared. Throws std::invalid_argument if it is 0.
  FeatureMatrix turn_off(NodeId u, FeatureId f) const;

  std::vector<FeatureEntry> entries() const;
  Matrix to_dense() const;

  friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
    return a.n_rows_ == b.n_rows_ && a.n_cols_ == b.n_cols_ && a.row_offsets_ == b.row_offsets_ &&
           a.row_cols_ == b.row_cols_;
  }

 private:
  NodeId n_rows_ = 0;
  FeatureId n_cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<FeatureId> row_cols_;
  std::vector<std::size_t> col_offsets_{0};
  std::vector<NodeId> col_rows_;
  std::vector<std::size_t> col_entry_;
};

}  // namespace gcnrobust

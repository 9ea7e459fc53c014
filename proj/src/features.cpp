#include "gcnrobust/features.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace gcnrobust {

FeatureMatrix::FeatureMatrix(NodeId n_rows, FeatureId n_cols, std::span<const FeatureEntry> ones)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      row_offsets_(static_cast<std::size_t>(n_rows) + 1, 0),
      col_offsets_(static_cast<std::size_t>(n_cols) + 1, 0) {
  std::vector<FeatureEntry> sorted(ones.begin(), ones.end());
  for (auto [u, f] : sorted) {
    if (u < 0 || u >= n_rows || f < 0 || f >= n_cols) {
      throw std::out_of_range("feature entry (" + std::to_string(u) + ", " + std::to_string(f) +
                              ") outside " + std::to_string(n_rows) + "x" + std::to_string(n_cols));
    }
  }
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  row_cols_.reserve(sorted.size());
  for (auto [u, f] : sorted) {
    ++row_offsets_[u + 1];
    ++col_offsets_[f + 1];
    row_cols_.push_back(f);
  }
  for (NodeId u = 0; u < n_rows; ++u) row_offsets_[u + 1] += row_offsets_[u];
  for (FeatureId f = 0; f < n_cols; ++f) col_offsets_[f + 1] += col_offsets_[f];

  col_rows_.resize(sorted.size());
  col_entry_.resize(sorted.size());
  std::vector<std::size_t> cursor(col_offsets_.begin(), col_offsets_.end() - 1);
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const auto [u, f] = sorted[k];
    col_rows_[cursor[f]] = u;
    col_entry_[cursor[f]++] = k;
  }
}

FeatureMatrix FeatureMatrix::all_ones(NodeId n_rows, FeatureId n_cols) {
  std::vector<FeatureEntry> ones;
  ones.reserve(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols));
  for (NodeId u = 0; u < n_rows; ++u) {
    for (FeatureId f = 0; f < n_cols; ++f) ones.emplace_back(u, f);
  }
  return FeatureMatrix(n_rows, n_cols, ones);
}

bool FeatureMatrix::has(NodeId u, FeatureId f) const {
  auto r = row(u);
  return std::binary_search(r.begin(), r.end(), f);
}

std::size_t FeatureMatrix::overlap(NodeId u, NodeId v) const {
  auto a = row(u);
  auto b = row(v);
  std::size_t count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

FeatureMatrix FeatureMatrix::turn_off(NodeId u, FeatureId f) const {
  if (u < 0 || u >= n_rows_ || !has(u, f)) {
    throw std::invalid_argument("turn_off: entry (" + std::to_string(u) + ", " + std::to_string(f) +
                                ") is not set");
  }
  auto all = entries();
  all.erase(std::find(all.begin(), all.end(), FeatureEntry{u, f}));
  return FeatureMatrix(n_rows_, n_cols_, all);
}

std::vector<FeatureEntry> FeatureMatrix::entries() const {
  std::vector<FeatureEntry> out;
  out.reserve(nnz());
  for (NodeId u = 0; u < n_rows_; ++u) {
    for (FeatureId f : row(u)) out.emplace_back(u, f);
  }
  return out;
}

Matrix FeatureMatrix::to_dense() const {
  Matrix out = Matrix::Zero(n_rows_, n_cols_);
  for (NodeId u = 0; u < n_rows_; ++u) {
    for (FeatureId f : row(u)) out(u, f) = 1.0;
  }
  return out;
}

}  // namespace gcnrobust

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcnrobust/features.hpp"
#include "gcnrobust/graph.hpp"

namespace gcnrobust {

/// Load/parse failure carrying the offending file and line (0 = whole file).
class DataError : public std::runtime_error {
 public:
  DataError(const std::filesystem::path& file, std::size_t line, const std::string& what);
  const std::filesystem::path& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::filesystem::path file_;
  std::size_t line_;
};

struct Dataset {
  std::string name;
  Graph graph;
  FeatureMatrix features;
  std::vector<ClassId> labels;
  ClassId n_classes = 0;

  NodeId n_nodes() const { return graph.n_nodes(); }
  FeatureId n_features() const { return features.cols(); }

  /// Throws std::invalid_argument if shapes or labels are inconsistent.
  void validate() const;

  std::vector<std::vector<NodeId>> nodes_by_class() const;
};

/// Reads graph.tsv, features.tsv, labels.tsv and meta.json from `dir`.
/// features.tsv may be absent, in which case X is an N x 1 all-ones matrix
/// and n_features in meta.json is ignored.
Dataset load_dataset(const std::filesystem::path& dir);

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

struct SbmConfig {
  std::vector<NodeId> block_sizes{400, 400, 400, 400, 400};
  /// Extra within-block probability x; the base probability is y = 0.004 - 0.2 x.
  double inprob = 0.0125;
  FeatureId n_features = 50;
  FeatureId per_class_feature_count = 10;
  double p_feature_on_class = 0.35;
  double p_feature_off_class = 0.1;
  std::uint64_t seed = 0;

  double p_between() const { return 0.004 - 0.2 * inprob; }
  double p_within() const { return inprob + p_between(); }

  /// Throws std::invalid_argument.
  void validate() const;
};

/// Planted-partition graph with class-correlated binary features. Block c
/// owns features [c * per_class_feature_count, (c + 1) * per_class_feature_count).
Dataset generate_sbm(const SbmConfig& cfg);

}  // namespace gcnrobust

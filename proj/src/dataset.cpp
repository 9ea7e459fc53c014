#include "gcnrobust/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gcnrobust/rng.hpp"

namespace gcnrobust {

namespace fs = std::filesystem;

DataError::DataError(const fs::path& file, std::size_t line, const std::string& what)
    : std::runtime_error(file.string() + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                         ": " + what),
      file_(file),
      line_(line) {}

void Dataset::validate() const {
  const auto n = static_cast<std::size_t>(graph.n_nodes());
  if (features.rows() != graph.n_nodes()) throw std::invalid_argument("feature rows != node count");
  if (labels.size() != n) throw std::invalid_argument("label count != node count");
  if (n_classes < 2) throw std::invalid_argument("need at least two classes");
  for (ClassId c : labels) {
    if (c < 0 || c >= n_classes) throw std::invalid_argument("label out of range");
  }
}

std::vector<std::vector<NodeId>> Dataset::nodes_by_class() const {
  std::vector<std::vector<NodeId>> out(static_cast<std::size_t>(n_classes));
  for (NodeId u = 0; u < n_nodes(); ++u) out[labels[u]].push_back(u);
  return out;
}

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path, 0, "cannot open file");
  return in;
}

// Parses "a<TAB>b" into two non-negative integers.
std::pair<std::int64_t, std::int64_t> parse_pair(const fs::path& path, std::size_t line_no,
                                                 const std::string& line) {
  std::int64_t vals[2];
  const char* p = line.data();
  const char* end = line.data() + line.size();
  for (int k = 0; k < 2; ++k) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    auto [next, ec] = std::from_chars(p, end, vals[k]);
    if (ec != std::errc() || vals[k] < 0) throw DataError(path, line_no, "expected two non-negative integers");
    p = next;
  }
  while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
  if (p != end) throw DataError(path, line_no, "trailing characters");
  return {vals[0], vals[1]};
}

template <typename Fn>
void for_each_pair(const fs::path& path, Fn&& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto [a, b] = parse_pair(path, line_no, line);
    fn(line_no, a, b);
  }
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  nlohmann::json meta;
  {
    auto in = open_input(meta_path);
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(meta_path, 0, e.what());
    }
  }
  Dataset ds;
  std::int64_t n = 0, d = 0, c = 0;
  try {
    n = meta.at("n_nodes").get<std::int64_t>();
    c = meta.at("n_classes").get<std::int64_t>();
    d = meta.value("n_features", std::int64_t{1});
    ds.name = meta.value("name", dir.filename().string());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(meta_path, 0, e.what());
  }
  if (n <= 0 || c < 2 || d <= 0) throw DataError(meta_path, 0, "invalid dimensions");
  ds.n_classes = static_cast<ClassId>(c);

  const fs::path graph_path = dir / "graph.tsv";
  std::vector<Edge> edges;
  for_each_pair(graph_path, [&](std::size_t line_no, std::int64_t u, std::int64_t v) {
    if (u >= n || v >= n) throw DataError(graph_path, line_no, "node index >= n_nodes");
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  });
  ds.graph = Graph::from_edges(static_cast<NodeId>(n), edges);

  const fs::path feat_path = dir / "features.tsv";
  if (fs::exists(feat_path)) {
    std::vector<FeatureEntry> ones;
    for_each_pair(feat_path, [&](std::size_t line_no, std::int64_t u, std::int64_t f) {
      if (u >= n) throw DataError(feat_path, line_no, "node index >= n_nodes");
      if (f >= d) throw DataError(feat_path, line_no, "feature index >= n_features");
      ones.emplace_back(static_cast<NodeId>(u), static_cast<FeatureId>(f));
    });
    ds.features = FeatureMatrix(static_cast<NodeId>(n), static_cast<FeatureId>(d), ones);
  } else {
    ds.features = FeatureMatrix::all_ones(static_cast<NodeId>(n), 1);
  }

  const fs::path label_path = dir / "labels.tsv";
  ds.labels.assign(static_cast<std::size_t>(n), -1);
  for_each_pair(label_path, [&](std::size_t line_no, std::int64_t u, std::int64_t cls) {
    if (u >= n) throw DataError(label_path, line_no, "node index >= n_nodes");
    if (cls >= c) throw DataError(label_path, line_no, "class " + std::to_string(cls) + " >= n_classes");
    ds.labels[u] = static_cast<ClassId>(cls);
  });
  for (NodeId u = 0; u < n; ++u) {
    if (ds.labels[u] < 0) throw DataError(label_path, 0, "node " + std::to_string(u) + " has no label");
  }
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  ds.validate();
  fs::create_directories(dir);
  auto open = [](const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw DataError(p, 0, "cannot open file for writing");
    return out;
  };
  {
    auto out = open(dir / "graph.tsv");
    for (auto [u, v] : ds.graph.edges()) out << u << '\t' << v << '\n';
  }
  {
    auto out = open(dir / "features.tsv");
    for (auto [u, f] : ds.features.entries()) out << u << '\t' << f << '\n';
  }
  {
    auto out = open(dir / "labels.tsv");
    for (NodeId u = 0; u < ds.n_nodes(); ++u) out << u << '\t' << ds.labels[u] << '\n';
  }
  nlohmann::json meta{{"n_nodes", ds.n_nodes()},
                      {"n_features", ds.n_features()},
                      {"n_classes", ds.n_classes},
                      {"name", ds.name}};
  open(dir / "meta.json") << meta.dump(2) << '\n';
}

void SbmConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (block_sizes.size() < 2) throw std::invalid_argument("sbm: need at least two blocks");
  for (NodeId b : block_sizes) {
    if (b <= 0) throw std::invalid_argument("sbm: block sizes must be positive");
  }
  if (!prob(inprob)) throw std::invalid_argument("sbm: inprob outside [0,1]");
  if (p_between() < 0.0) throw std::invalid_argument("sbm: 0.004 - 0.2*inprob is negative");
  if (p_within() > 1.0) throw std::invalid_argument("sbm: within-block probability exceeds 1");
  if (!prob(p_feature_on_class) || !prob(p_feature_off_class)) {
    throw std::invalid_argument("sbm: feature probabilities outside [0,1]");
  }
  if (n_features <= 0 || per_class_feature_count < 0 ||
      per_class_feature_count * static_cast<FeatureId>(block_sizes.size()) > n_features) {
    throw std::invalid_argument("sbm: per-class feature blocks do not fit in n_features");
  }
}

Dataset generate_sbm(const SbmConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.name = "sbm";
  ds.n_classes = static_cast<ClassId>(cfg.block_sizes.size());
  for (ClassId c = 0; c < ds.n_classes; ++c) ds.labels.insert(ds.labels.end(), cfg.block_sizes[c], c);
  const auto n = static_cast<NodeId>(ds.labels.size());

  Rng rng(cfg.seed);
  const double p_in = cfg.p_within();
  const double p_out = cfg.p_between();
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (rng.bernoulli(ds.labels[u] == ds.labels[v] ? p_in : p_out)) edges.emplace_back(u, v);
    }
  }
  ds.graph = Graph::from_edges(n, edges);

  std::vector<FeatureEntry> ones;
  for (NodeId u = 0; u < n; ++u) {
    const FeatureId lo = ds.labels[u] * cfg.per_class_feature_count;
    const FeatureId hi = lo + cfg.per_class_feature_count;
    for (FeatureId f = 0; f < cfg.n_features; ++f) {
      const bool own = f >= lo && f < hi;
      if (rng.bernoulli(own ? cfg.p_feature_on_class : cfg.p_feature_off_class)) ones.emplace_back(u, f);
    }
  }
  ds.features = FeatureMatrix(n, cfg.n_features, ones);
  return ds;
}

}  // namespace gcnrobust

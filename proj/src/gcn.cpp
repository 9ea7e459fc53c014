#include "gcnrobust/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gcnrobust {

std::unique_ptr<LinearOperator> FeatureOperator::with_dropout(double rate, Rng& rng) const {
  std::vector<double> scale(x_->nnz());
  const double keep = 1.0 / (1.0 - rate);
  for (std::size_t k = 0; k < scale.size(); ++k) {
    const double base = scale_.empty() ? 1.0 : scale_[k];
    scale[k] = rng.uniform() < rate ? 0.0 : base * keep;
  }
  return std::make_unique<FeatureOperator>(*x_, std::move(scale), exec_);
}

bool GcnParams::all_finite() const {
  return w1.allFinite() && w2.allFinite() && (!use_bias || (b1.allFinite() && b2.allFinite()));
}

namespace {

Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < fan_in; ++i) {
    for (Eigen::Index j = 0; j < fan_out; ++j) w(i, j) = rng.uniform(-r, r);
  }
  return w;
}

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("dimension mismatch: ") + what);
}

void check_inputs(const GcnParams& p, const LinearOperator& adj, const LinearOperator& x) {
  check(adj.rows() == adj.cols(), "adjacency is not square");
  check(x.rows() == adj.rows(), "feature rows != node count");
  check(x.cols() == p.w1.rows(), "feature columns != W1 rows");
  check(p.w1.cols() == p.w2.rows(), "W1 columns != W2 rows");
  if (p.use_bias) {
    check(p.b1.size() == p.w1.cols() && p.b2.size() == p.w2.cols(), "bias sizes");
  }
}

// Intermediate values of one forward pass, kept for the backward pass.
struct Forward {
  Matrix z1;
  Matrix h_in;        // activation after dropout (input to layer 2)
  Matrix h_dropout;   // per-entry scale applied to h, empty when no dropout
  Matrix logits;
};

Forward forward_pass(const GcnParams& p, const LinearOperator& adj, const LinearOperator& x, Activation act,
                     double h_dropout = 0.0, Rng* rng = nullptr) {
  Forward f;
  f.z1 = adj.apply(x.apply(p.w1));
  if (p.use_bias) f.z1.rowwise() += p.b1;
  f.h_in = act == Activation::Relu ? Matrix(f.z1.cwiseMax(0.0)) : f.z1;
  if (h_dropout > 0.0 && rng != nullptr) {
    const double keep = 1.0 / (1.0 - h_dropout);
    f.h_dropout.resize(f.h_in.rows(), f.h_in.cols());
    for (Eigen::Index i = 0; i < f.h_dropout.rows(); ++i) {
      for (Eigen::Index j = 0; j < f.h_dropout.cols(); ++j) {
        f.h_dropout(i, j) = rng->uniform() < h_dropout ? 0.0 : keep;
      }
    }
    f.h_in = f.h_in.cwiseProduct(f.h_dropout);
  }
  f.logits = adj.apply(f.h_in * p.w2);
  if (p.use_bias) f.logits.rowwise() += p.b2;
  return f;
}

// Mean cross-entropy over `mask` and its gradient w.r.t. the logits.
double cross_entropy(const Matrix& logits, std::span<const ClassId> labels, std::span<const NodeId> mask,
                     Matrix* dlogits) {
  if (mask.empty()) throw std::invalid_argument("cross_entropy: empty mask");
  const double inv_m = 1.0 / static_cast<double>(mask.size());
  if (dlogits) *dlogits = Matrix::Zero(logits.rows(), logits.cols());
  double loss = 0.0;
  for (NodeId u : mask) {
    const auto row = logits.row(u);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    loss -= row(labels[u]) - lse;
    if (dlogits) {
      dlogits->row(u) = (row.array() - lse).exp().matrix() * inv_m;
      (*dlogits)(u, labels[u]) -= inv_m;
    }
  }
  return loss * inv_m;
}

GcnGradients backward_pass(const GcnParams& p, const LinearOperator& adj, const LinearOperator& x,
                           const Forward& f, const Matrix& dlogits, Activation act) {
  GcnGradients g;
  const Matrix a_dz2 = adj.apply_transposed(dlogits);
  g.w2 = f.h_in.transpose() * a_dz2;
  if (p.use_bias) g.b2 = dlogits.colwise().sum();
  Matrix dz1 = a_dz2 * p.w2.transpose();
  if (f.h_dropout.size() > 0) dz1 = dz1.cwiseProduct(f.h_dropout);
  if (act == Activation::Relu) dz1 = dz1.cwiseProduct((f.z1.array() > 0.0).cast<double>().matrix());
  if (p.use_bias) g.b1 = dz1.colwise().sum();
  g.w1 = x.apply_transposed(adj.apply_transposed(dz1));
  return g;
}

// Adam state for one parameter block.
struct AdamSlot {
  Matrix m, v;
  void update(Matrix& param, const Matrix& grad, double lr, int t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (m.size() == 0) {
      m = Matrix::Zero(param.rows(), param.cols());
      v = Matrix::Zero(param.rows(), param.cols());
    }
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

void update_row(AdamSlot& slot, RowVector& param, const RowVector& grad, double lr, int t) {
  Matrix p = param;
  slot.update(p, grad, lr, t);
  param = p;
}

void check_split_for_training(const Split& split) {
  if (split.train.empty()) throw std::invalid_argument("training set is empty");
  if (split.val.empty()) throw std::invalid_argument("validation set is empty");
}

}  // namespace

GcnParams init_gcn_params(Eigen::Index n_features, Eigen::Index hidden, Eigen::Index n_classes, bool use_bias,
                          Rng& rng) {
  GcnParams p;
  p.w1 = glorot(n_features, hidden, rng);
  p.w2 = glorot(hidden, n_classes, rng);
  p.b1 = RowVector::Zero(hidden);
  p.b2 = RowVector::Zero(n_classes);
  p.use_bias = use_bias;
  return p;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const Eigen::ArrayXd e = (row.array() - row.maxCoeff()).exp().transpose();
    out.row(i) = (e / e.sum()).matrix().transpose();
  }
  return out;
}

Matrix gcn_logits(const GcnParams& p, const LinearOperator& adj, const LinearOperator& x, Activation act) {
  check_inputs(p, adj, x);
  return forward_pass(p, adj, x, act).logits;
}

Matrix gcn_forward(const GcnParams& p, const LinearOperator& adj, const LinearOperator& x, Activation act) {
  return softmax_rows(gcn_logits(p, adj, x, act));
}

Matrix gcn_forward(const GcnParams& p, const NormalizedAdjacency& adj, const FeatureMatrix& x) {
  return gcn_forward(p, AdjacencyOperator(adj), FeatureOperator(x));
}

GcnGradients gcn_backward(const GcnParams& p, const LinearOperator& adj, const LinearOperator& x,
                          std::span<const ClassId> labels, std::span<const NodeId> mask, Activation act) {
  check_inputs(p, adj, x);
  const Forward f = forward_pass(p, adj, x, act);
  Matrix dlogits;
  const double loss = cross_entropy(f.logits, labels, mask, &dlogits);
  GcnGradients g = backward_pass(p, adj, x, f, dlogits, act);
  g.loss = loss;
  return g;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (patience < 1 || patience > max_epochs) throw std::invalid_argument("patience must be in [1, max_epochs]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay}, {"max_epochs", c.max_epochs},
          {"patience", c.patience},           {"dropout", c.dropout},           {"hidden", c.hidden},
          {"use_bias", c.use_bias},           {"self_loops", c.self_loops},     {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.dropout = j.value("dropout", c.dropout);
  c.hidden = j.value("hidden", c.hidden);
  c.use_bias = j.value("use_bias", c.use_bias);
  c.self_loops = j.value("self_loops", c.self_loops);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

GcnParams gcn_train(const LinearOperator& adj, const LinearOperator& x, std::span<const ClassId> labels,
                    ClassId n_classes, const Split& split, const TrainConfig& cfg, TrainHistory* history) {
  cfg.validate();
  check_split_for_training(split);
  Rng init_rng(derive_seed(cfg.seed, 0));
  GcnParams p = init_gcn_params(x.cols(), cfg.hidden, n_classes, cfg.use_bias, init_rng);
  check_inputs(p, adj, x);

  AdamSlot s_w1, s_w2, s_b1, s_b2;
  GcnParams best = p;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  TrainHistory local;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng drop_rng(derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(epoch)));
    std::unique_ptr<LinearOperator> x_drop = cfg.dropout > 0.0 ? x.with_dropout(cfg.dropout, drop_rng) : nullptr;
    const LinearOperator& x_in = x_drop ? *x_drop : x;
    const Forward f = forward_pass(p, adj, x_in, Activation::Relu, cfg.dropout, &drop_rng);
    Matrix dlogits;
    double loss = cross_entropy(f.logits, labels, split.train, &dlogits);
    GcnGradients g = backward_pass(p, adj, x_in, f, dlogits, Activation::Relu);
    loss += 0.5 * cfg.weight_decay * p.w1.squaredNorm();
    g.w1 += cfg.weight_decay * p.w1;

    const int t = epoch + 1;
    s_w1.update(p.w1, g.w1, cfg.learning_rate, t);
    s_w2.update(p.w2, g.w2, cfg.learning_rate, t);
    if (p.use_bias) {
      update_row(s_b1, p.b1, g.b1, cfg.learning_rate, t);
      update_row(s_b2, p.b2, g.b2, cfg.learning_rate, t);
    }

    const double val = cross_entropy(forward_pass(p, adj, x, Activation::Relu).logits, labels, split.val, nullptr);
    local.train_loss.push_back(loss);
    local.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best = p;
      local.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (history) *history = std::move(local);
  return best;
}

GcnParams gcn_train(const Dataset& ds, const Split& split, const TrainConfig& cfg, TrainHistory* history) {
  const NormalizedAdjacency a = normalized_adjacency(ds.graph, cfg.self_loops);
  return gcn_train(AdjacencyOperator(a), FeatureOperator(ds.features), ds.labels, ds.n_classes, split, cfg, history);
}

Matrix surrogate_logits(const SurrogateParams& s, const LinearOperator& adj, const LinearOperator& x) {
  check(adj.rows() == adj.cols() && x.rows() == adj.rows(), "surrogate adjacency/features");
  check(x.cols() == s.w.rows(), "feature columns != W rows");
  return adj.apply(adj.apply(x.apply(s.w)));
}

Matrix surrogate_forward(const SurrogateParams& s, const LinearOperator& adj, const LinearOperator& x) {
  return softmax_rows(surrogate_logits(s, adj, x));
}

Matrix surrogate_forward(const SurrogateParams& s, const NormalizedAdjacency& adj, const FeatureMatrix& x) {
  return surrogate_forward(s, AdjacencyOperator(adj), FeatureOperator(x));
}

SurrogateParams surrogate_train(const LinearOperator& adj, const LinearOperator& x, std::span<const ClassId> labels,
                                ClassId n_classes, const Split& split, const TrainConfig& cfg,
                                TrainHistory* history) {
  cfg.validate();
  check_split_for_training(split);
  const Matrix x_dense = x.apply(Matrix::Identity(x.cols(), x.cols()));
  const Matrix propagated = adj.apply(adj.apply(x_dense));

  Rng init_rng(derive_seed(cfg.seed, 2));
  SurrogateParams s{glorot(x.cols(), n_classes, init_rng)};
  AdamSlot slot;
  SurrogateParams best = s;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  TrainHistory local;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const Matrix logits = propagated * s.w;
    Matrix dlogits;
    double loss = cross_entropy(logits, labels, split.train, &dlogits);
    Matrix grad = propagated.transpose() * dlogits;
    loss += 0.5 * cfg.weight_decay * s.w.squaredNorm();
    grad += cfg.weight_decay * s.w;
    slot.update(s.w, grad, cfg.learning_rate, epoch + 1);

    const double val = cross_entropy(propagated * s.w, labels, split.val, nullptr);
    local.train_loss.push_back(loss);
    local.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best = s;
      local.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (history) *history = std::move(local);
  return best;
}

SurrogateParams surrogate_train(const Dataset& ds, const Split& split, const TrainConfig& cfg,
                                TrainHistory* history) {
  const NormalizedAdjacency a = normalized_adjacency(ds.graph, cfg.self_loops);
  return surrogate_train(AdjacencyOperator(a), FeatureOperator(ds.features), ds.labels, ds.n_classes, split, cfg,
                         history);
}

double margin(std::span<const double> probs, ClassId true_class) {
  if (true_class < 0 || static_cast<std::size_t>(true_class) >= probs.size() || probs.size() < 2) {
    throw std::invalid_argument("margin: class index outside probability vector");
  }
  const double pc = probs[true_class];
  if (pc <= 0.0) return -std::numeric_limits<double>::infinity();
  double other = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    if (static_cast<ClassId>(c) != true_class) other = std::max(other, probs[c]);
  }
  if (other <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log(pc / other);
}

double margin(const RowVector& probs, ClassId true_class) {
  return margin(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())), true_class);
}

double margin_from_logits(const RowVector& logits, ClassId true_class) {
  if (true_class < 0 || true_class >= logits.size() || logits.size() < 2) {
    throw std::invalid_argument("margin_from_logits: class index outside row");
  }
  double other = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < logits.size(); ++c) {
    if (c != true_class) other = std::max(other, logits(c));
  }
  return logits(true_class) - other;
}

std::vector<ClassId> argmax_rows(const Matrix& m) {
  std::vector<ClassId> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    m.row(i).maxCoeff(&best);
    out[i] = static_cast<ClassId>(best);
  }
  return out;
}

double f1_macro(std::span<const ClassId> predictions, std::span<const ClassId> labels, std::span<const NodeId> mask,
                ClassId n_classes) {
  if (mask.empty()) throw std::invalid_argument("f1_macro: empty mask");
  std::vector<double> tp(static_cast<std::size_t>(n_classes), 0.0), fp(tp), fn(tp);
  for (NodeId u : mask) {
    const ClassId pred = predictions[u];
    const ClassId truth = labels[u];
    if (pred == truth) {
      tp[truth] += 1.0;
    } else {
      fp[pred] += 1.0;
      fn[truth] += 1.0;
    }
  }
  double sum = 0.0;
  for (ClassId c = 0; c < n_classes; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    sum += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
  }
  return sum / static_cast<double>(n_classes);
}

double accuracy(std::span<const ClassId> predictions, std::span<const ClassId> labels, std::span<const NodeId> mask) {
  if (mask.empty()) throw std::invalid_argument("accuracy: empty mask");
  std::size_t hits = 0;
  for (NodeId u : mask) hits += predictions[u] == labels[u] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw std::invalid_argument("matrix data size mismatch");
  return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

nlohmann::json gcn_to_json(const GcnParams& p) {
  return {{"format", "gcnrobust-gcn"},
          {"version", 1},
          {"use_bias", p.use_bias},
          {"w1", matrix_to_json(p.w1)},
          {"w2", matrix_to_json(p.w2)},
          {"b1", std::vector<double>(p.b1.data(), p.b1.data() + p.b1.size())},
          {"b2", std::vector<double>(p.b2.data(), p.b2.data() + p.b2.size())}};
}

GcnParams gcn_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "gcnrobust-gcn" || j.value("version", 0) != 1) {
    throw std::invalid_argument("not a version-1 gcn checkpoint");
  }
  GcnParams p;
  p.use_bias = j.at("use_bias").get<bool>();
  p.w1 = matrix_from_json(j.at("w1"));
  p.w2 = matrix_from_json(j.at("w2"));
  const auto b1 = j.at("b1").get<std::vector<double>>();
  const auto b2 = j.at("b2").get<std::vector<double>>();
  p.b1 = Eigen::Map<const RowVector>(b1.data(), static_cast<Eigen::Index>(b1.size()));
  p.b2 = Eigen::Map<const RowVector>(b2.data(), static_cast<Eigen::Index>(b2.size()));
  if (p.w1.cols() != p.w2.rows() || p.b1.size() != p.w1.cols() || p.b2.size() != p.w2.cols()) {
    throw std::invalid_argument("gcn checkpoint: inconsistent shapes");
  }
  return p;
}

}  // namespace gcnrobust

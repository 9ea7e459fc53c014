#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "gcnrobust/dataset.hpp"
#include "gcnrobust/kernels.hpp"
#include "gcnrobust/rng.hpp"
#include "gcnrobust/selection.hpp"

namespace gcnrobust {

/// Linear map used as a GCN input: the propagation matrix or the feature
/// matrix. Implementations hold references; the referenced data must outlive
/// the operator.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;
  virtual Matrix apply(const Matrix& rhs) const = 0;
  virtual Matrix apply_transposed(const Matrix& rhs) const = 0;
  /// Copy with inverted dropout applied to the stored entries, or nullptr if
  /// the operator does not support it.
  virtual std::unique_ptr<LinearOperator> with_dropout(double /*rate*/, Rng& /*rng*/) const { return nullptr; }
};

class AdjacencyOperator final : public LinearOperator {
 public:
  explicit AdjacencyOperator(const NormalizedAdjacency& a, Exec exec = Exec::Parallel) : a_(&a), exec_(exec) {}
  Eigen::Index rows() const override { return a_->n; }
  Eigen::Index cols() const override { return a_->n; }
  Matrix apply(const Matrix& rhs) const override { return kernels::spmm(*a_, rhs, exec_); }
  // The normalized adjacency is symmetric.
  Matrix apply_transposed(const Matrix& rhs) const override { return kernels::spmm(*a_, rhs, exec_); }

 private:
  const NormalizedAdjacency* a_;
  Exec exec_;
};

class FeatureOperator final : public LinearOperator {
 public:
  explicit FeatureOperator(const FeatureMatrix& x, Exec exec = Exec::Parallel) : x_(&x), exec_(exec) {}
  FeatureOperator(const FeatureMatrix& x, std::vector<double> scale, Exec exec)
      : x_(&x), scale_(std::move(scale)), exec_(exec) {}
  Eigen::Index rows() const override { return x_->rows(); }
  Eigen::Index cols() const override { return x_->cols(); }
  Matrix apply(const Matrix& rhs) const override { return kernels::feature_product(*x_, scale_, rhs, exec_); }
  Matrix apply_transposed(const Matrix& rhs) const override {
    return kernels::feature_transpose_product(*x_, scale_, rhs, exec_);
  }
  std::unique_ptr<LinearOperator> with_dropout(double rate, Rng& rng) const override;

 private:
  const FeatureMatrix* x_;
  std::vector<double> scale_;
  Exec exec_;
};

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(const Matrix& m) : m_(&m) {}
  Eigen::Index rows() const override { return m_->rows(); }
  Eigen::Index cols() const override { return m_->cols(); }
  Matrix apply(const Matrix& rhs) const override { return (*m_) * rhs; }
  Matrix apply_transposed(const Matrix& rhs) const override { return m_->transpose() * rhs; }

 private:
  const Matrix* m_;
};

enum class Activation { Relu, Identity };

struct GcnParams {
  Matrix w1;  // d x h
  Matrix w2;  // h x C
  RowVector b1;
  RowVector b2;
  bool use_bias = true;

  Eigen::Index n_features() const { return w1.rows(); }
  Eigen::Index hidden() const { return w1.cols(); }
  Eigen::Index n_classes() const { return w2.cols(); }
  bool all_finite() const;
};

/// Glorot-uniform weights, zero biases.
GcnParams init_gcn_params(Eigen::Index n_features, Eigen::Index hidden, Eigen::Index n_classes, bool use_bias,
                          Rng& rng);

/// Pre-softmax outputs A * act(A X W1 + b1) W2 + b2.
Matrix gcn_logits(const GcnParams& p, const LinearOperator& adj, const LinearOperator& x,
                  Activation act = Activation::Relu);

/// Row-wise softmax of gcn_logits.
Matrix gcn_forward(const GcnParams& p, const LinearOperator& adj, const LinearOperator& x,
                   Activation act = Activation::Relu);
Matrix gcn_forward(const GcnParams& p, const NormalizedAdjacency& adj, const FeatureMatrix& x);

struct GcnGradients {
  double loss = 0.0;  // mean cross-entropy over the mask
  Matrix w1;
  Matrix w2;
  RowVector b1;
  RowVector b2;
};

/// Gradient of the mean cross-entropy over `mask` nodes (no regularization).
GcnGradients gcn_backward(const GcnParams& p, const LinearOperator& adj, const LinearOperator& x,
                          std::span<const ClassId> labels, std::span<const NodeId> mask,
                          Activation act = Activation::Relu);

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  int max_epochs = 200;
  int patience = 30;
  double dropout = 0.5;
  int hidden = 16;
  bool use_bias = true;
  bool self_loops = false;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument.
  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});

struct TrainHistory {
  std::vector<double> train_loss;  // per epoch, as optimized (with dropout)
  std::vector<double> val_loss;
  int best_epoch = 0;
};

/// Adam on the mean training cross-entropy plus weight_decay/2 * |W1|^2, with
/// dropout on both convolution inputs and early stopping on validation loss
/// (the best-validation parameters are returned). Throws std::invalid_argument
/// on an empty training or validation set.
GcnParams gcn_train(const LinearOperator& adj, const LinearOperator& x, std::span<const ClassId> labels,
                    ClassId n_classes, const Split& split, const TrainConfig& cfg, TrainHistory* history = nullptr);
GcnParams gcn_train(const Dataset& ds, const Split& split, const TrainConfig& cfg, TrainHistory* history = nullptr);

/// Linearized two-hop model softmax(A^2 X W).
struct SurrogateParams {
  Matrix w;  // d x C
};

Matrix surrogate_logits(const SurrogateParams& s, const LinearOperator& adj, const LinearOperator& x);
Matrix surrogate_forward(const SurrogateParams& s, const LinearOperator& adj, const LinearOperator& x);
Matrix surrogate_forward(const SurrogateParams& s, const NormalizedAdjacency& adj, const FeatureMatrix& x);

/// Trains W directly on softmax(A^2 X W) with Adam, weight decay on W and
/// early stopping; no dropout.
SurrogateParams surrogate_train(const LinearOperator& adj, const LinearOperator& x, std::span<const ClassId> labels,
                                ClassId n_classes, const Split& split, const TrainConfig& cfg,
                                TrainHistory* history = nullptr);
SurrogateParams surrogate_train(const Dataset& ds, const Split& split, const TrainConfig& cfg,
                                TrainHistory* history = nullptr);

Matrix softmax_rows(const Matrix& logits);

/// log(p_c / max_{c' != c} p_c'). Returns -infinity when p_c == 0.
double margin(std::span<const double> probs, ClassId true_class);
double margin(const RowVector& probs, ClassId true_class);
/// Same quantity from pre-softmax scores: z_c - max_{c' != c} z_c'.
double margin_from_logits(const RowVector& logits, ClassId true_class);

std::vector<ClassId> argmax_rows(const Matrix& m);

/// Unweighted mean of per-class F1 over classes 0..n_classes-1; a class with
/// no true and no predicted members scores 0. Throws on an empty mask.
double f1_macro(std::span<const ClassId> predictions, std::span<const ClassId> labels, std::span<const NodeId> mask,
                ClassId n_classes);

double accuracy(std::span<const ClassId> predictions, std::span<const ClassId> labels, std::span<const NodeId> mask);

nlohmann::json gcn_to_json(const GcnParams& p);
GcnParams gcn_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace gcnrobust

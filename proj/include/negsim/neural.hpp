#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "negsim/features.hpp"
#include "negsim/types.hpp"

namespace negsim {

// Batches are stored one sample per column.
using Matrix = Eigen::MatrixXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class DimensionMismatch : public std::invalid_argument {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got);
};

class EmptyDataset : public std::invalid_argument {
 public:
  EmptyDataset() : std::invalid_argument("dataset is empty") {}
};

enum class Activation : std::uint8_t { Identity, Tanh, Sigmoid };

const char* to_string(Activation a);

enum class Mode : std::uint8_t { Train, Eval };

// Fully connected network with parameters in one flat buffer (per layer: W
// row-major, then b). Inverted dropout follows every hidden layer.
class Mlp {
 public:
  Mlp() = default;
  // `activations` has one entry per layer (sizes.size() - 1 entries). With
  // `dropout_after_last`, the output layer is treated as hidden too (trunks).
  Mlp(std::vector<int> sizes, std::vector<Activation> activations, double dropout = 0.0,
      bool dropout_after_last = false);

  // Fan-in-scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
  void init(Rng& rng);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int layers() const { return static_cast<int>(activations_.size()); }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<Activation>& activations() const { return activations_; }
  double dropout() const { return dropout_; }
  bool dropout_after_last() const { return dropout_last_; }
  void set_dropout(double rate) { dropout_ = rate; }

  // Pure evaluation; never applies dropout.
  Matrix predict(const Matrix& x) const;

  // Training pass that caches what backward() needs. With `rng` set and a
  // positive rate, fresh dropout masks are drawn; with `reuse_masks`, the
  // masks of the previous pass are applied again.
  Matrix forward(const Matrix& x, Rng* rng = nullptr, bool reuse_masks = false);

  // Accumulates parameter gradients of the last forward pass and returns the
  // gradient with respect to its input.
  Matrix backward(const Matrix& grad_out);

  void zero_grad();
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> grads() { return grads_; }
  std::span<const double> grads() const { return grads_; }

  Eigen::Map<RowMajorMatrix> weight(int layer);
  Eigen::Map<const RowMajorMatrix> weight(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  bool operator==(const Mlp& other) const;

 private:
  std::size_t offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }
  Eigen::Map<RowMajorMatrix> weight_grad(int layer);
  Eigen::Map<Eigen::VectorXd> bias_grad(int layer);

  std::vector<int> sizes_;
  std::vector<Activation> activations_;
  double dropout_ = 0.0;
  bool dropout_last_ = false;
  std::vector<std::size_t> offsets_;
  // Over-aligned so that vectorized kernels see the same alignment (and thus
  // round the same way) wherever the buffer lands on the heap.
  using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;
  Buffer params_;
  Buffer grads_;

  // Forward cache: inputs to each layer (post-dropout), activations, masks.
  std::vector<Matrix> inputs_;
  std::vector<Matrix> outputs_;
  std::vector<Matrix> masks_;
};

void apply_activation(Activation a, Matrix& z);

struct PolicyArchitecture {
  int input = static_cast<int>(kFeatureDim);
  std::vector<int> hidden{64, 64};
  double dropout = 0.2;
};

struct PolicyOutput {
  Matrix logits;              // kPolicyActions x batch
  Matrix probs;               // softmax of logits, per column
  Eigen::RowVectorXd offer;   // offer_unit in (0, 1)
};

// Numerically stable column-wise softmax.
Matrix softmax_columns(const Matrix& logits);

// Shared tanh trunk with a discrete-action head (logits) and a sigmoid offer
// head rescaled to [IP_b, RP_b] by the caller.
class PolicyNetwork {
 public:
  PolicyNetwork() : PolicyNetwork(PolicyArchitecture{}) {}
  explicit PolicyNetwork(const PolicyArchitecture& arch);
  PolicyNetwork(const PolicyArchitecture& arch, Rng& rng);

  void init(Rng& rng);
  const PolicyArchitecture& architecture() const { return arch_; }
  double dropout() const { return trunk_.dropout(); }
  void set_dropout(double rate) { trunk_.set_dropout(rate); }

  // Throws DimensionMismatch when x.rows() differs from the input size.
  // Eval mode is pure; Train mode caches for backward and applies dropout
  // when `rng` is given.
  PolicyOutput forward(const Matrix& x, Mode mode, Rng* rng = nullptr, bool reuse_masks = false);
  PolicyOutput forward(const FeatureVector& x, Mode mode, Rng* rng = nullptr);
  PolicyOutput predict(const Matrix& x) const;

  // Gradients w.r.t. logits and pre-rescaling offer; returns d/dx.
  Matrix backward(const Matrix& grad_logits, const Eigen::RowVectorXd& grad_offer);

  void zero_grad();
  // Parameter blocks in a fixed order: trunk, action head, offer head.
  std::vector<Mlp*> blocks() { return {&trunk_, &head_c_, &head_r_}; }
  std::vector<const Mlp*> blocks() const { return {&trunk_, &head_c_, &head_r_}; }
  std::size_t parameter_count() const;

  Mlp& trunk() { return trunk_; }
  Mlp& action_head() { return head_c_; }
  Mlp& offer_head() { return head_r_; }
  const Mlp& offer_head() const { return head_r_; }

  bool operator==(const PolicyNetwork& other) const;

 private:
  void check_input(const Matrix& x) const;

  PolicyArchitecture arch_;
  Mlp trunk_;
  Mlp head_c_;
  Mlp head_r_;
};

// Adam over a fixed list of parameter blocks.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Mlp*> blocks, AdamConfig cfg);
  void step();
  AdamConfig& config() { return cfg_; }

 private:
  std::vector<Mlp*> blocks_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 10;
  double dropout_rate = 0.2;
  std::uint64_t seed = 1;
  double validation_fraction = 0.2;  // held out from the end of the row order
  double offer_weight = 1.0;         // lambda on the offer MSE

  // Empty when valid.
  std::vector<std::string> validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double val_offer_rmse = 0;  // unit scale, over counter-offer rows
};

inline constexpr std::string_view kHistoryHeader =
    "epoch,train_loss,train_accuracy,val_loss,val_accuracy,val_offer_rmse";
std::string format_history_row(const EpochStats& s);

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

struct EvalStats {
  double loss = 0;
  double accuracy = 0;
  double offer_rmse = 0;  // unit scale; 0 when there are no counter-offer rows
  std::size_t rows = 0;
};

// Joint loss CE(head_c) + lambda * MSE(head_r on counter-offer rows).
// Accuracy counts argmax over the legal head entries.
EvalStats evaluate_policy(const PolicyNetwork& net, std::span<const DatasetRow> rows,
                          double offer_weight = 1.0);

// Minibatch Adam on the joint loss. The network's dropout rate is set from
// the config. Throws EmptyDataset.
TrainHistory train_supervised(PolicyNetwork& net, std::span<const DatasetRow> data,
                              const TrainConfig& cfg);

// Central finite differences (step 1e-5) on up to `samples` randomly chosen
// parameters of the joint loss; dropout masks are frozen between
// evaluations. Returns the max relative error |a - n| / max(1e-8, |a| + |n|).
double gradient_check(PolicyNetwork& net, std::span<const DatasetRow> batch, Rng& rng,
                      int samples = 200, bool with_dropout = false);

// Same check for an arbitrary network under the loss 0.5 * ||f(x) - y||^2.
double gradient_check(Mlp& net, const Matrix& x, const Matrix& y, Rng& rng, int samples = 200,
                      bool with_dropout = false);

// Versioned text checkpoints; doubles use the shortest round-trip form, so a
// save/load cycle is bit-exact.
void save_network(const Mlp& net, std::ostream& out);
Mlp load_network(std::istream& in);
void save_policy(const PolicyNetwork& net, const std::filesystem::path& path);
PolicyNetwork load_policy(const std::filesystem::path& path);
void save_policy(const PolicyNetwork& net, std::ostream& out);
PolicyNetwork load_policy_stream(std::istream& in);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Feature matrix (kFeatureDim x rows) for a span of dataset rows.
Matrix feature_matrix(std::span<const DatasetRow> rows);
Matrix feature_matrix(std::span<const FeatureVector> rows);

}  // namespace negsim

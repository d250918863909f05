#include "negsim/neural.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "negsim/csv.hpp"

namespace negsim {

DimensionMismatch::DimensionMismatch(std::size_t expected, std::size_t got)
    : std::invalid_argument("expected input dimension " + std::to_string(expected) + ", got " +
                            std::to_string(got)) {}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

namespace {

std::optional<Activation> parse_activation(std::string_view s) {
  if (s == "identity") return Activation::Identity;
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  return std::nullopt;
}

// Derivative expressed through the activation output y.
void scale_by_derivative(Activation a, const Matrix& y, Matrix& g) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Tanh: g.array() *= 1.0 - y.array().square(); break;
    case Activation::Sigmoid: g.array() *= y.array() * (1.0 - y.array()); break;
  }
}

}  // namespace

void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Tanh: z = z.array().tanh(); break;
    case Activation::Sigmoid: z = 1.0 / (1.0 + (-z.array()).exp()); break;
  }
}

Mlp::Mlp(std::vector<int> sizes, std::vector<Activation> activations, double dropout,
         bool dropout_after_last)
    : sizes_(std::move(sizes)),
      activations_(std::move(activations)),
      dropout_(dropout),
      dropout_last_(dropout_after_last) {
  if (sizes_.size() < 2 || activations_.size() != sizes_.size() - 1) {
    throw std::invalid_argument("Mlp needs one activation per layer");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw std::invalid_argument("layer sizes must be > 0");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l] + 1);
  }
  params_.assign(total, 0.0);
  grads_.assign(total, 0.0);
}

void Mlp::init(Rng& rng) {
  for (int l = 0; l < layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[static_cast<std::size_t>(l)]));
    auto w = weight(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
    bias(l).setZero();
  }
}

Eigen::Map<RowMajorMatrix> Mlp::weight(int l) {
  const auto i = static_cast<std::size_t>(l);
  return {params_.data() + offset(l), sizes_[i + 1], sizes_[i]};
}

Eigen::Map<const RowMajorMatrix> Mlp::weight(int l) const {
  const auto i = static_cast<std::size_t>(l);
  return {params_.data() + offset(l), sizes_[i + 1], sizes_[i]};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias(int l) {
  const auto i = static_cast<std::size_t>(l);
  return {params_.data() + offset(l) + static_cast<std::size_t>(sizes_[i + 1] * sizes_[i]),
          sizes_[i + 1]};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(int l) const {
  const auto i = static_cast<std::size_t>(l);
  return {params_.data() + offset(l) + static_cast<std::size_t>(sizes_[i + 1] * sizes_[i]),
          sizes_[i + 1]};
}

Eigen::Map<RowMajorMatrix> Mlp::weight_grad(int l) {
  const auto i = static_cast<std::size_t>(l);
  return {grads_.data() + offset(l), sizes_[i + 1], sizes_[i]};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias_grad(int l) {
  const auto i = static_cast<std::size_t>(l);
  return {grads_.data() + offset(l) + static_cast<std::size_t>(sizes_[i + 1] * sizes_[i]),
          sizes_[i + 1]};
}

Matrix Mlp::predict(const Matrix& x) const {
  Matrix h = x;
  for (int l = 0; l < layers(); ++l) {
    Matrix z = weight(l) * h;
    z.colwise() += bias(l);
    apply_activation(activations_[static_cast<std::size_t>(l)], z);
    h = std::move(z);
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x, Rng* rng, bool reuse_masks) {
  const auto n = static_cast<std::size_t>(layers());
  inputs_.resize(n);
  outputs_.resize(n);
  if (!reuse_masks || masks_.size() != n) masks_.assign(n, Matrix());
  const double keep = 1.0 - dropout_;
  Matrix h = x;
  for (std::size_t l = 0; l < n; ++l) {
    inputs_[l] = h;
    Matrix z = weight(static_cast<int>(l)) * h;
    z.colwise() += bias(static_cast<int>(l));
    apply_activation(activations_[l], z);
    outputs_[l] = z;
    const bool hidden = l + 1 < n || dropout_last_;
    if (hidden && !reuse_masks && rng != nullptr && dropout_ > 0.0) {
      std::bernoulli_distribution draw(keep);
      Matrix m(z.rows(), z.cols());
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = draw(*rng) ? 1.0 / keep : 0.0;
      masks_[l] = std::move(m);
    }
    if (masks_[l].size() != 0) {
      if (masks_[l].rows() != z.rows() || masks_[l].cols() != z.cols()) {
        throw std::logic_error("dropout mask does not match the batch");
      }
      z.array() *= masks_[l].array();
    }
    h = std::move(z);
  }
  return h;
}

Matrix Mlp::backward(const Matrix& grad_out) {
  if (inputs_.size() != static_cast<std::size_t>(layers())) {
    throw std::logic_error("backward called without forward");
  }
  Matrix g = grad_out;
  for (int l = layers() - 1; l >= 0; --l) {
    const auto i = static_cast<std::size_t>(l);
    if (masks_[i].size() != 0) g.array() *= masks_[i].array();
    scale_by_derivative(activations_[i], outputs_[i], g);
    weight_grad(l).noalias() += g * inputs_[i].transpose();
    bias_grad(l) += g.rowwise().sum();
    g = weight(l).transpose() * g;
  }
  return g;
}

void Mlp::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

bool Mlp::operator==(const Mlp& o) const {
  return sizes_ == o.sizes_ && activations_ == o.activations_ && dropout_ == o.dropout_ &&
         dropout_last_ == o.dropout_last_ && params_ == o.params_;
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    auto col = p.col(c);
    col.array() -= col.maxCoeff();
    col = col.array().exp();
    col /= col.sum();
  }
  return p;
}

PolicyNetwork::PolicyNetwork(const PolicyArchitecture& arch) : arch_(arch) {
  std::vector<int> sizes{arch.input};
  sizes.insert(sizes.end(), arch.hidden.begin(), arch.hidden.end());
  trunk_ = Mlp(sizes, std::vector<Activation>(arch.hidden.size(), Activation::Tanh), arch.dropout,
               true);
  const int width = sizes.back();
  head_c_ = Mlp({width, static_cast<int>(kPolicyActions)}, {Activation::Identity});
  head_r_ = Mlp({width, 1}, {Activation::Sigmoid});
}

PolicyNetwork::PolicyNetwork(const PolicyArchitecture& arch, Rng& rng) : PolicyNetwork(arch) {
  init(rng);
}

void PolicyNetwork::init(Rng& rng) {
  trunk_.init(rng);
  head_c_.init(rng);
  head_r_.init(rng);
}

void PolicyNetwork::check_input(const Matrix& x) const {
  if (x.rows() != arch_.input) {
    throw DimensionMismatch(static_cast<std::size_t>(arch_.input), static_cast<std::size_t>(x.rows()));
  }
}

PolicyOutput PolicyNetwork::forward(const Matrix& x, Mode mode, Rng* rng, bool reuse_masks) {
  if (mode == Mode::Eval) return predict(x);
  check_input(x);
  const Matrix h = trunk_.forward(x, rng, reuse_masks);
  PolicyOutput out;
  out.logits = head_c_.forward(h);
  out.probs = softmax_columns(out.logits);
  out.offer = head_r_.forward(h).row(0);
  return out;
}

PolicyOutput PolicyNetwork::forward(const FeatureVector& x, Mode mode, Rng* rng) {
  const Matrix m = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return forward(m, mode, rng);
}

PolicyOutput PolicyNetwork::predict(const Matrix& x) const {
  check_input(x);
  const Matrix h = trunk_.predict(x);
  PolicyOutput out;
  out.logits = head_c_.predict(h);
  out.probs = softmax_columns(out.logits);
  out.offer = head_r_.predict(h).row(0);
  return out;
}

Matrix PolicyNetwork::backward(const Matrix& grad_logits, const Eigen::RowVectorXd& grad_offer) {
  Matrix gh = head_c_.backward(grad_logits);
  gh += head_r_.backward(Matrix(grad_offer));
  return trunk_.backward(gh);
}

void PolicyNetwork::zero_grad() {
  for (auto* b : blocks()) b->zero_grad();
}

std::size_t PolicyNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto* b : blocks()) n += b->params().size();
  return n;
}

bool PolicyNetwork::operator==(const PolicyNetwork& o) const {
  return arch_.input == o.arch_.input && arch_.hidden == o.arch_.hidden && trunk_ == o.trunk_ &&
         head_c_ == o.head_c_ && head_r_ == o.head_r_;
}

Adam::Adam(std::vector<Mlp*> blocks, AdamConfig cfg) : blocks_(std::move(blocks)), cfg_(cfg) {
  for (auto* b : blocks_) {
    m_.emplace_back(b->params().size(), 0.0);
    v_.emplace_back(b->params().size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    auto p = blocks_[k]->params();
    auto g = blocks_[k]->grads();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      p[i] -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }
}

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> out;
  if (!(learning_rate > 0)) out.emplace_back("learning rate must be > 0");
  if (batch_size < 1) out.emplace_back("batch size must be >= 1");
  if (epochs < 1) out.emplace_back("epochs must be >= 1");
  if (!(dropout_rate >= 0 && dropout_rate < 1)) out.emplace_back("dropout rate must be in [0, 1)");
  if (!(validation_fraction > 0 && validation_fraction < 1)) {
    out.emplace_back("validation split must be in (0, 1)");
  }
  if (!(offer_weight >= 0)) out.emplace_back("offer loss weight must be >= 0");
  return out;
}

std::string format_history_row(const EpochStats& s) {
  return std::to_string(s.epoch) + ',' + format_number(s.train_loss) + ',' +
         format_number(s.train_accuracy) + ',' + format_number(s.val_loss) + ',' +
         format_number(s.val_accuracy) + ',' + format_number(s.val_offer_rmse);
}

Matrix feature_matrix(std::span<const DatasetRow> rows) {
  Matrix x(static_cast<Eigen::Index>(kFeatureDim), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    for (std::size_t r = 0; r < kFeatureDim; ++r) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[c].features[r];
    }
  }
  return x;
}

Matrix feature_matrix(std::span<const FeatureVector> rows) {
  Matrix x(static_cast<Eigen::Index>(kFeatureDim), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    for (std::size_t r = 0; r < kFeatureDim; ++r) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[c][r];
    }
  }
  return x;
}

namespace {

struct BatchLoss {
  double ce = 0;        // summed over rows
  double sq = 0;        // summed over offer rows
  std::size_t offer_rows = 0;
  std::size_t correct = 0;
};

int masked_argmax(const Matrix& logits, Eigen::Index col, const std::array<bool, kPolicyActions>& legal) {
  int best = -1;
  for (int k = 0; k < static_cast<int>(kPolicyActions); ++k) {
    if (!legal[static_cast<std::size_t>(k)]) continue;
    if (best < 0 || logits(k, col) > logits(best, col)) best = k;
  }
  return best < 0 ? 0 : best;
}

// Loss pieces and (optionally) gradients of the joint objective, normalized as
// mean CE over all rows plus lambda * mean squared error over offer rows.
BatchLoss joint_loss(const PolicyOutput& out, std::span<const DatasetRow> rows, double lambda,
                     Matrix* grad_logits, Eigen::RowVectorXd* grad_offer) {
  BatchLoss b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& row = rows[static_cast<std::size_t>(c)];
    const int label = static_cast<int>(row.label_action);
    b.ce -= std::log(std::max(out.probs(label, c), 1e-300));
    if (masked_argmax(out.logits, c, legal_policy_mask(row.features)) == label) ++b.correct;
    if (auto y = row.offer_unit()) {
      const double d = out.offer(c) - *y;
      b.sq += d * d;
      ++b.offer_rows;
    }
  }
  if (grad_logits != nullptr) {
    *grad_logits = out.probs;
    grad_offer->setZero(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    const double inv_o = b.offer_rows ? 1.0 / static_cast<double>(b.offer_rows) : 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto& row = rows[static_cast<std::size_t>(c)];
      (*grad_logits)(static_cast<int>(row.label_action), c) -= 1.0;
      if (auto y = row.offer_unit()) (*grad_offer)(c) = 2.0 * lambda * (out.offer(c) - *y) * inv_o;
    }
    *grad_logits *= inv_n;
  }
  return b;
}

double batch_objective(const BatchLoss& b, std::size_t n, double lambda) {
  const double mse = b.offer_rows ? b.sq / static_cast<double>(b.offer_rows) : 0.0;
  return b.ce / static_cast<double>(n) + lambda * mse;
}

}  // namespace

EvalStats evaluate_policy(const PolicyNetwork& net, std::span<const DatasetRow> rows,
                          double offer_weight) {
  EvalStats s;
  s.rows = rows.size();
  if (rows.empty()) return s;
  constexpr std::size_t kChunk = 4096;
  BatchLoss total;
  for (std::size_t i = 0; i < rows.size(); i += kChunk) {
    const auto part = rows.subspan(i, std::min(kChunk, rows.size() - i));
    const PolicyOutput out = net.predict(feature_matrix(part));
    const BatchLoss b = joint_loss(out, part, offer_weight, nullptr, nullptr);
    total.ce += b.ce;
    total.sq += b.sq;
    total.offer_rows += b.offer_rows;
    total.correct += b.correct;
  }
  s.loss = batch_objective(total, rows.size(), offer_weight);
  s.accuracy = static_cast<double>(total.correct) / static_cast<double>(rows.size());
  s.offer_rmse = total.offer_rows ? std::sqrt(total.sq / static_cast<double>(total.offer_rows)) : 0.0;
  return s;
}

TrainHistory train_supervised(PolicyNetwork& net, std::span<const DatasetRow> data,
                              const TrainConfig& cfg) {
  if (data.empty()) throw EmptyDataset();
  if (auto errs = cfg.validate(); !errs.empty()) throw std::invalid_argument(errs.front());

  auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(data.size())));
  if (data.size() > 1) n_val = std::clamp<std::size_t>(n_val, 1, data.size() - 1);
  else n_val = 0;
  const auto train = data.first(data.size() - n_val);
  const auto val = data.last(n_val);

  net.set_dropout(cfg.dropout_rate);
  Adam opt(net.blocks(), AdamConfig{cfg.learning_rate});
  Rng order_rng = derive_rng(cfg.seed, 200);
  Rng dropout_rng = derive_rng(cfg.seed, 201);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<DatasetRow> batch;
  Matrix grad_logits;
  Eigen::RowVectorXd grad_offer;

  TrainHistory history;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    BatchLoss run;
    double loss_sum = 0;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t j = i; j < end; ++j) batch.push_back(train[order[j]]);
      net.zero_grad();
      const PolicyOutput out = net.forward(feature_matrix(batch), Mode::Train, &dropout_rng);
      const BatchLoss b = joint_loss(out, batch, cfg.offer_weight, &grad_logits, &grad_offer);
      net.backward(grad_logits, grad_offer);
      opt.step();
      loss_sum += batch_objective(b, batch.size(), cfg.offer_weight) * static_cast<double>(batch.size());
      run.correct += b.correct;
    }
    EpochStats s;
    s.epoch = epoch;
    s.train_loss = loss_sum / static_cast<double>(train.size());
    s.train_accuracy = static_cast<double>(run.correct) / static_cast<double>(train.size());
    const EvalStats v = evaluate_policy(net, val.empty() ? train : val, cfg.offer_weight);
    s.val_loss = v.loss;
    s.val_accuracy = v.accuracy;
    s.val_offer_rmse = v.offer_rmse;
    history.epochs.push_back(s);
  }
  return history;
}

namespace {

struct ParamRef {
  Mlp* block;
  std::size_t index;
};

std::vector<ParamRef> sample_params(std::vector<Mlp*> blocks, Rng& rng, int samples) {
  std::vector<ParamRef> all;
  for (auto* b : blocks) {
    for (std::size_t i = 0; i < b->params().size(); ++i) all.push_back({b, i});
  }
  std::shuffle(all.begin(), all.end(), rng);
  if (samples > 0 && static_cast<std::size_t>(samples) < all.size()) all.resize(static_cast<std::size_t>(samples));
  return all;
}

double relative_error(double a, double n) {
  return std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
}

constexpr double kFdStep = 1e-5;

}  // namespace

double gradient_check(PolicyNetwork& net, std::span<const DatasetRow> batch, Rng& rng, int samples,
                      bool with_dropout) {
  if (batch.empty()) throw EmptyDataset();
  const Matrix x = feature_matrix(batch);
  Rng mask_rng = derive_rng(rng(), 0);

  net.zero_grad();
  Matrix gl;
  Eigen::RowVectorXd go;
  const PolicyOutput out = net.forward(x, Mode::Train, with_dropout ? &mask_rng : nullptr);
  joint_loss(out, batch, 1.0, &gl, &go);
  net.backward(gl, go);

  auto loss_at = [&]() {
    const PolicyOutput o = net.forward(x, Mode::Train, nullptr, true);
    return batch_objective(joint_loss(o, batch, 1.0, nullptr, nullptr), batch.size(), 1.0);
  };

  double worst = 0;
  for (const auto& ref : sample_params(net.blocks(), rng, samples)) {
    double& p = ref.block->params()[ref.index];
    const double analytic = ref.block->grads()[ref.index];
    const double saved = p;
    p = saved + kFdStep;
    const double up = loss_at();
    p = saved - kFdStep;
    const double down = loss_at();
    p = saved;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2 * kFdStep)));
  }
  return worst;
}

double gradient_check(Mlp& net, const Matrix& x, const Matrix& y, Rng& rng, int samples,
                      bool with_dropout) {
  Rng mask_rng = derive_rng(rng(), 0);
  net.zero_grad();
  const Matrix out = net.forward(x, with_dropout ? &mask_rng : nullptr);
  net.backward(out - y);
  auto loss_at = [&]() { return 0.5 * (net.forward(x, nullptr, true) - y).squaredNorm(); };
  double worst = 0;
  for (const auto& ref : sample_params({&net}, rng, samples)) {
    double& p = ref.block->params()[ref.index];
    const double analytic = ref.block->grads()[ref.index];
    const double saved = p;
    p = saved + kFdStep;
    const double up = loss_at();
    p = saved - kFdStep;
    const double down = loss_at();
    p = saved;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2 * kFdStep)));
  }
  return worst;
}

namespace {

constexpr std::string_view kMlpMagic = "negsim-mlp";
constexpr std::string_view kPolicyMagic = "negsim-policy";
constexpr int kCheckpointVersion = 1;

std::string next_token(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw CheckpointError("truncated checkpoint");
  return tok;
}

void expect(std::istream& in, std::string_view word) {
  if (next_token(in) != word) throw CheckpointError("malformed checkpoint: expected " + std::string(word));
}

template <typename T>
T parse_value(const std::string& tok) {
  T v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw CheckpointError("bad number in checkpoint: " + tok);
  }
  return v;
}

}  // namespace

void save_network(const Mlp& net, std::ostream& out) {
  out << kMlpMagic << ' ' << kCheckpointVersion << '\n';
  out << "sizes " << net.sizes().size();
  for (int s : net.sizes()) out << ' ' << s;
  out << "\nactivations";
  for (auto a : net.activations()) out << ' ' << to_string(a);
  out << "\ndropout " << format_number(net.dropout()) << ' ' << (net.dropout_after_last() ? 1 : 0);
  out << "\nparams " << net.params().size() << '\n';
  for (double v : net.params()) out << format_number(v) << '\n';
}

Mlp load_network(std::istream& in) {
  expect(in, kMlpMagic);
  if (parse_value<int>(next_token(in)) != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version");
  }
  expect(in, "sizes");
  const auto n = parse_value<std::size_t>(next_token(in));
  if (n < 2 || n > 64) throw CheckpointError("bad layer count");
  std::vector<int> sizes(n);
  for (auto& s : sizes) s = parse_value<int>(next_token(in));
  expect(in, "activations");
  std::vector<Activation> acts(n - 1);
  for (auto& a : acts) {
    const auto parsed = parse_activation(next_token(in));
    if (!parsed) throw CheckpointError("unknown activation");
    a = *parsed;
  }
  expect(in, "dropout");
  const double rate = parse_value<double>(next_token(in));
  const bool last = parse_value<int>(next_token(in)) != 0;
  Mlp net(sizes, acts, rate, last);
  expect(in, "params");
  if (parse_value<std::size_t>(next_token(in)) != net.params().size()) {
    throw CheckpointError("parameter count does not match layer sizes");
  }
  for (double& v : net.params()) v = parse_value<double>(next_token(in));
  return net;
}

void save_policy(const PolicyNetwork& net, std::ostream& out) {
  out << kPolicyMagic << ' ' << kCheckpointVersion << '\n';
  for (const auto* b : net.blocks()) save_network(*b, out);
}

PolicyNetwork load_policy_stream(std::istream& in) {
  expect(in, kPolicyMagic);
  if (parse_value<int>(next_token(in)) != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version");
  }
  Mlp trunk = load_network(in);
  Mlp head_c = load_network(in);
  Mlp head_r = load_network(in);
  if (trunk.activations().empty() || head_c.output_dim() != static_cast<int>(kPolicyActions) ||
      head_r.output_dim() != 1 || head_c.input_dim() != trunk.output_dim() ||
      head_r.input_dim() != trunk.output_dim()) {
    throw CheckpointError("checkpoint is not a policy network");
  }
  PolicyArchitecture arch;
  arch.input = trunk.input_dim();
  arch.hidden.assign(trunk.sizes().begin() + 1, trunk.sizes().end());
  arch.dropout = trunk.dropout();
  PolicyNetwork net(arch);
  auto copy = [](const Mlp& from, Mlp& to) {
    if (from.sizes() != to.sizes() || from.activations() != to.activations()) {
      throw CheckpointError("checkpoint block does not match the policy architecture");
    }
    std::copy(from.params().begin(), from.params().end(), to.params().begin());
  };
  copy(trunk, net.trunk());
  copy(head_c, net.action_head());
  copy(head_r, net.offer_head());
  return net;
}

void save_policy(const PolicyNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  save_policy(net, out);
  out.close();
  if (!out) throw CheckpointError("failed writing " + path.string());
}

PolicyNetwork load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read " + path.string());
  return load_policy_stream(in);
}

}  // namespace negsim

#include "negsim/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "negsim/csv.hpp"

namespace negsim {

EncodedAction encode_action(PolicyAction action, double offer_unit) {
  EncodedAction a{};
  a[static_cast<std::size_t>(action)] = 1.0;
  a[kPolicyActions] = action == PolicyAction::CounterOffer ? offer_unit : 0.0;
  return a;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be > 0");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(const Experience& e) {
  if (items_.size() < capacity_) {
    items_.push_back(e);
  } else {
    items_[next_] = e;
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<Experience> ReplayBuffer::sample(std::size_t k, Rng& rng) const {
  if (k > items_.size()) throw std::invalid_argument("sample larger than buffer");
  // Floyd's algorithm: k distinct indices without materializing the range.
  std::vector<std::size_t> picked;
  picked.reserve(k);
  const std::size_t n = items_.size();
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    picked.push_back(std::find(picked.begin(), picked.end(), t) == picked.end() ? t : j);
  }
  std::vector<Experience> out;
  out.reserve(k);
  for (auto i : picked) out.push_back(items_[i]);
  return out;
}

std::vector<std::string> DdpgConfig::validate() const {
  std::vector<std::string> out;
  if (capacity == 0) out.emplace_back("replay capacity N must be > 0");
  if (batch == 0) out.emplace_back("batch size K must be >= 1");
  if (batch >= capacity) out.emplace_back("K must be < N");
  if (!(gamma >= 0 && gamma <= 1)) out.emplace_back("gamma must be in [0, 1]");
  if (!(tau > 0 && tau <= 1)) out.emplace_back("tau must be in (0, 1]");
  if (!(noise_scale >= 0)) out.emplace_back("noise scale must be >= 0");
  if (!(actor_lr > 0) || !(critic_lr > 0)) out.emplace_back("learning rates must be > 0");
  if (!(reward.d_t >= 0 && reward.d_t <= 1)) out.emplace_back("d_t must be in [0, 1]");
  if (updates_per_step < 0) out.emplace_back("updates per step must be >= 0");
  if (train_every < 1) out.emplace_back("train_every must be >= 1");
  return out;
}

Mlp make_critic(const std::vector<int>& hidden) {
  std::vector<int> sizes{static_cast<int>(kFeatureDim + kActionDim)};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  std::vector<Activation> acts(hidden.size(), Activation::Tanh);
  acts.push_back(Activation::Identity);
  return Mlp(sizes, acts);
}

namespace {

// Buyer kinds in canonical ActionKind order, for tie-breaking.
constexpr std::array<PolicyAction, kPolicyActions> kCanonicalOrder = {
    PolicyAction::CounterOffer, PolicyAction::ReqToReserve, PolicyAction::Confirm,
    PolicyAction::Accept, PolicyAction::Exit};

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix m(top.rows() + bottom.rows(), top.cols());
  m.topRows(top.rows()) = top;
  m.bottomRows(bottom.rows()) = bottom;
  return m;
}

std::array<bool, kPolicyActions> mask_of(const Matrix& states, Eigen::Index col) {
  FeatureVector f{};
  for (std::size_t r = 0; r < kFeatureDim; ++r) f[r] = states(static_cast<Eigen::Index>(r), col);
  return legal_policy_mask(f);
}

}  // namespace

PolicyAction masked_greedy(const Eigen::Ref<const Eigen::VectorXd>& logits,
                           const std::array<bool, kPolicyActions>& legal) {
  std::optional<PolicyAction> best;
  for (PolicyAction a : kCanonicalOrder) {
    const auto i = static_cast<Eigen::Index>(a);
    if (!legal[static_cast<std::size_t>(a)]) continue;
    if (!best || logits(i) > logits(static_cast<Eigen::Index>(*best))) best = a;
  }
  return best.value_or(PolicyAction::Exit);
}

ActorCritic::ActorCritic(PolicyNetwork actor, const DdpgConfig& cfg, Rng& init_rng)
    : ActorCritic(actor, make_critic(cfg.critic_hidden), actor, make_critic(cfg.critic_hidden), cfg) {
  critic_.init(init_rng);
  std::copy(critic_.params().begin(), critic_.params().end(), target_critic_.params().begin());
}

ActorCritic::ActorCritic(PolicyNetwork actor, Mlp critic, PolicyNetwork target_actor,
                         Mlp target_critic, const DdpgConfig& cfg)
    : cfg_(cfg),
      actor_(std::move(actor)),
      critic_(std::move(critic)),
      target_actor_(std::move(target_actor)),
      target_critic_(std::move(target_critic)),
      actor_opt_(actor_.blocks(), AdamConfig{cfg.actor_lr}),
      critic_opt_({&critic_}, AdamConfig{cfg.critic_lr}) {
  if (auto errs = cfg_.validate(); !errs.empty()) throw std::invalid_argument(errs.front());
}

NegotiationAction ActorCritic::select_action(const ObservedState& state, ActionSet legal,
                                             Exploration mode, Rng& rng, PolicyAction* chosen,
                                             double* offer_unit) const {
  const FeatureVector f = encode(state);
  const PolicyOutput out =
      actor_.predict(Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size())));
  std::array<bool, kPolicyActions> mask{};
  for (std::size_t k = 0; k < kPolicyActions; ++k) {
    mask[k] = legal.contains(to_action_kind(static_cast<PolicyAction>(k)));
  }
  const PolicyAction a = masked_greedy(out.logits.col(0), mask);
  double unit = out.offer(0);
  if (mode == Exploration::Explore && cfg_.noise_scale > 0) {
    unit += std::normal_distribution<double>(0.0, cfg_.noise_scale)(rng);
  }
  unit = std::clamp(unit, 0.0, 1.0);
  if (chosen) *chosen = a;
  if (offer_unit) *offer_unit = unit;
  if (a == PolicyAction::CounterOffer) {
    return NegotiationAction::offer(state.ip_b + unit * (state.rp_b - state.ip_b));
  }
  return NegotiationAction::make(to_action_kind(a));
}

Matrix ActorCritic::greedy_actions(const PolicyOutput& out, const Matrix& states) const {
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(kActionDim), states.cols());
  for (Eigen::Index c = 0; c < states.cols(); ++c) {
    const PolicyAction g = masked_greedy(out.logits.col(c), mask_of(states, c));
    a(static_cast<Eigen::Index>(g), c) = 1.0;
    if (g == PolicyAction::CounterOffer) a(static_cast<Eigen::Index>(kPolicyActions), c) = out.offer(c);
  }
  return a;
}

Matrix ActorCritic::q_values(std::span<const Experience> batch, bool target) const {
  Matrix x(static_cast<Eigen::Index>(kFeatureDim + kActionDim), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t c = 0; c < batch.size(); ++c) {
    for (std::size_t r = 0; r < kFeatureDim; ++r) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = batch[c].s[r];
    for (std::size_t r = 0; r < kActionDim; ++r) {
      x(static_cast<Eigen::Index>(kFeatureDim + r), static_cast<Eigen::Index>(c)) = batch[c].a[r];
    }
  }
  return target ? target_critic_.predict(x) : critic_.predict(x);
}

UpdateStats ActorCritic::update(std::span<const Experience> batch) {
  if (batch.empty()) throw EmptyBatch();
  const auto k = static_cast<Eigen::Index>(batch.size());
  const double inv_k = 1.0 / static_cast<double>(k);
  Matrix s(static_cast<Eigen::Index>(kFeatureDim), k), s2(static_cast<Eigen::Index>(kFeatureDim), k);
  Matrix a(static_cast<Eigen::Index>(kActionDim), k);
  Eigen::RowVectorXd r(k), live(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto& e = batch[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
      s(static_cast<Eigen::Index>(i), c) = e.s[i];
      s2(static_cast<Eigen::Index>(i), c) = e.s_next[i];
    }
    for (std::size_t i = 0; i < kActionDim; ++i) a(static_cast<Eigen::Index>(i), c) = e.a[i];
    r(c) = e.r;
    live(c) = e.terminal ? 0.0 : 1.0;
  }

  // TD target from the target networks.
  const PolicyOutput next = target_actor_.predict(s2);
  const Matrix q_next = target_critic_.predict(stack(s2, greedy_actions(next, s2)));
  const Eigen::RowVectorXd y = r.array() + cfg_.gamma * live.array() * q_next.row(0).array();

  UpdateStats stats;
  critic_.zero_grad();
  const Matrix q = critic_.forward(stack(s, a));
  const Eigen::RowVectorXd err = q.row(0) - y;
  stats.critic_loss = err.squaredNorm() * inv_k;
  critic_.backward(Matrix(2.0 * inv_k * err));
  critic_opt_.step();

  // Actor: ascend Q(s, pi(s)) through the critic.
  actor_.zero_grad();
  const PolicyOutput out = actor_.forward(s, Mode::Train, nullptr);
  const Matrix pi = greedy_actions(out, s);
  critic_.zero_grad();
  const Matrix q_pi = critic_.forward(stack(s, pi));
  stats.actor_objective = q_pi.sum() * inv_k;
  const Matrix dq = critic_.backward(Matrix::Constant(1, k, inv_k));
  critic_.zero_grad();

  Matrix grad_logits = Matrix::Zero(static_cast<Eigen::Index>(kPolicyActions), k);
  Eigen::RowVectorXd grad_offer = Eigen::RowVectorXd::Zero(k);
  const auto n_act = static_cast<Eigen::Index>(kPolicyActions);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto legal = mask_of(s, c);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_act);
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n_act; ++i) {
      if (legal[static_cast<std::size_t>(i)]) mx = std::max(mx, out.logits(i, c));
    }
    for (Eigen::Index i = 0; i < n_act; ++i) {
      if (legal[static_cast<std::size_t>(i)]) p(i) = std::exp(out.logits(i, c) - mx);
    }
    p /= p.sum();
    // Minimize -Q: gradient is the negated critic input gradient.
    const Eigen::VectorXd g = -dq.block(static_cast<Eigen::Index>(kFeatureDim), c, n_act, 1);
    grad_logits.col(c) = p.cwiseProduct(g.array().matrix() - Eigen::VectorXd::Constant(n_act, p.dot(g)));
    if (pi(static_cast<Eigen::Index>(PolicyAction::CounterOffer), c) > 0.5) {
      grad_offer(c) = -dq(static_cast<Eigen::Index>(kFeatureDim + kPolicyActions), c);
    }
  }
  actor_.backward(grad_logits, grad_offer);
  actor_opt_.step();

  soft_update(cfg_.tau);
  return stats;
}

void ActorCritic::soft_update(double tau) {
  auto blend = [tau](std::span<const double> online, std::span<double> target) {
    for (std::size_t i = 0; i < online.size(); ++i) target[i] = tau * online[i] + (1.0 - tau) * target[i];
  };
  auto online = actor_.blocks();
  auto target = target_actor_.blocks();
  for (std::size_t b = 0; b < online.size(); ++b) blend(online[b]->params(), target[b]->params());
  blend(critic_.params(), target_critic_.params());
}

namespace {
constexpr std::string_view kAcMagic = "negsim-actor-critic";
}

void ActorCritic::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << kAcMagic << " 1\n";
  save_policy(actor_, out);
  save_network(critic_, out);
  save_policy(target_actor_, out);
  save_network(target_critic_, out);
  out.close();
  if (!out) throw CheckpointError("failed writing " + path.string());
}

std::unique_ptr<ActorCritic> ActorCritic::load(const std::filesystem::path& path, const DdpgConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kAcMagic || version != 1) {
    throw CheckpointError(path.string() + " is not an actor-critic checkpoint");
  }
  PolicyNetwork actor = load_policy_stream(in);
  Mlp critic = load_network(in);
  PolicyNetwork target_actor = load_policy_stream(in);
  Mlp target_critic = load_network(in);
  DdpgConfig c = cfg;
  c.critic_hidden.assign(critic.sizes().begin() + 1, critic.sizes().end() - 1);
  return std::unique_ptr<ActorCritic>(new ActorCritic(std::move(actor), std::move(critic),
                                                      std::move(target_actor),
                                                      std::move(target_critic), c));
}

std::string format_training_row(const TrainingLogRow& row) {
  return std::to_string(row.step) + ',' + std::to_string(row.episode) + ',' +
         format_number(row.reward) + ',' + format_number(row.critic_loss) + ',' +
         format_number(row.actor_objective) + ',' + format_number(row.noise);
}

LearningBuyer::LearningBuyer(ActorCritic& ac, ReplayBuffer* buffer, Options options)
    : ac_(ac),
      buffer_(buffer),
      options_(options),
      explore_rng_(derive_rng(options.seed, 300)),
      sample_rng_(derive_rng(options.seed, 301)) {
  if (options_.learning && buffer_ == nullptr) throw std::invalid_argument("learning needs a replay buffer");
}

void LearningBuyer::begin_episode(std::uint64_t episode) {
  episode_ = episode;
  pending_.clear();
  episode_reward_ = 0;
  loss_sum_ = 0;
  objective_sum_ = 0;
  episode_updates_ = 0;
}

TrainingLogRow LearningBuyer::episode_log() const {
  TrainingLogRow row;
  row.step = updates_;
  row.episode = episode_;
  row.reward = episode_reward_;
  const double n = episode_updates_ ? static_cast<double>(episode_updates_) : 1.0;
  row.critic_loss = loss_sum_ / n;
  row.actor_objective = objective_sum_ / n;
  row.noise = options_.mode == Exploration::Explore ? ac_.config().noise_scale : 0.0;
  return row;
}

void LearningBuyer::push(const Experience& e) {
  buffer_->push(e);
  ++pushed_;
  episode_reward_ += e.r;
  const std::size_t k = ac_.config().batch;
  if (buffer_->size() < k) return;
  if (pushed_ % static_cast<std::uint64_t>(ac_.config().train_every) != 0) return;
  for (int i = 0; i < ac_.config().updates_per_step; ++i) {
    const auto batch = buffer_->sample(k, sample_rng_);
    const UpdateStats st = ac_.update(batch);
    loss_sum_ += st.critic_loss;
    objective_sum_ += st.actor_objective;
    ++episode_updates_;
    ++updates_;
  }
}

NegotiationAction LearningBuyer::decide(const DecisionPoint& p) {
  ActionSet allowed = p.legal;
  if (!options_.mask_illegal) {
    allowed = {ActionKind::Offer, ActionKind::Accept, ActionKind::Confirm, ActionKind::ReqToReserve,
               ActionKind::Exit};
  }
  PolicyAction chosen = PolicyAction::Exit;
  double unit = 0;
  NegotiationAction act = ac_.select_action(p.state, allowed, options_.mode, explore_rng_, &chosen, &unit);
  if (!options_.learning) return act;

  const FeatureVector features = encode(p.state);
  const BuyerTerms terms{p.state.ip_b, p.state.rp_b, p.state.t_end};
  const RewardSpec& spec = ac_.config().reward;

  if (auto it = pending_.find(p.thread); it != pending_.end()) {
    push({it->second.s, it->second.a, it->second.r, features, false});
    pending_.erase(it);
  }

  // An illegal kind is replaced by Exit downstream; reward it as such.
  if (!p.legal.contains(act.kind())) chosen = PolicyAction::Exit;
  const EncodedAction encoded = encode_action(chosen, unit);
  switch (chosen) {
    case PolicyAction::CounterOffer: {
      const double r = reward_regression(*act.offer_value(), p.seller_offers, p.now, terms, spec);
      pending_[p.thread] = {features, encoded, r, p.now, terms};
      break;
    }
    case PolicyAction::Accept:
    case PolicyAction::Confirm: {
      const auto price = chosen == PolicyAction::Accept ? p.thread_state->last_seller_offer
                                                        : p.thread_state->reserved_offer;
      RewardContext ctx{RewardContext::Kind::Agreement, price.value_or(terms.rp_b), 0};
      push({features, encoded, reward_classification(ctx, p.now, terms, spec), features, true});
      break;
    }
    case PolicyAction::ReqToReserve:
      pending_[p.thread] = {features, encoded, 0.0, p.now, terms};
      break;
    case PolicyAction::Exit: {
      RewardContext ctx{RewardContext::Kind::NoDeal, 0, 0};
      push({features, encoded, reward_classification(ctx, p.now, terms, spec), features, true});
      break;
    }
  }
  return act;
}

void LearningBuyer::on_thread_closed(ThreadId thread, Millis now, CloseReason reason,
                                     std::optional<Price> agreement) {
  if (!options_.learning) return;
  auto it = pending_.find(thread);
  if (it == pending_.end()) return;
  const Pending pend = it->second;
  pending_.erase(it);
  double r = pend.r;
  switch (reason) {
    case CloseReason::SellerAccepted: {
      RewardContext ctx{RewardContext::Kind::Agreement, agreement.value_or(pend.terms.rp_b), 0};
      r = reward_classification(ctx, now, pend.terms, ac_.config().reward);
      break;
    }
    case CloseReason::Deadline: {
      // The losing action itself was taken in time.
      RewardContext ctx{RewardContext::Kind::NoDeal, 0, 0};
      r = reward_classification(ctx, pend.t, pend.terms, ac_.config().reward);
      break;
    }
    case CloseReason::SellerExit:
    case CloseReason::SellerLeft:
    case CloseReason::BuyerDone:
      break;
  }
  push({pend.s, pend.a, r, pend.s, true});
}

void LearningBuyer::on_episode_end(const EpisodeResult& /*result*/) {
  // Threads still pending were closed through on_thread_closed already.
  pending_.clear();
}

}  // namespace negsim

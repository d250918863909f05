#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "negsim/features.hpp"
#include "negsim/market.hpp"
#include "negsim/neural.hpp"
#include "negsim/rewards.hpp"

namespace negsim {

// Encoded action: one-hot over the policy head order, then offer_unit (0 for
// anything but a counter-offer).
inline constexpr std::size_t kActionDim = kPolicyActions + 1;
using EncodedAction = std::array<double, kActionDim>;

EncodedAction encode_action(PolicyAction action, double offer_unit);

struct Experience {
  FeatureVector s{};
  EncodedAction a{};
  double r = 0;  // in [-1, 1]
  FeatureVector s_next{};
  bool terminal = false;
};

class EmptyBatch : public std::invalid_argument {
 public:
  EmptyBatch() : std::invalid_argument("update needs at least one experience") {}
};

// Fixed-capacity ring of experiences.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Experience& e);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  // K distinct experiences, uniformly at random. Requires k <= size().
  std::vector<Experience> sample(std::size_t k, Rng& rng) const;
  const Experience& at(std::size_t i) const { return items_.at(i); }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Experience> items_;
};

struct DdpgConfig {
  std::size_t capacity = 100000;  // N
  std::size_t batch = 64;         // K
  double gamma = 0.99;
  double tau = 0.005;
  double noise_scale = 0.1;  // std-dev on the unit offer scale
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  std::vector<int> critic_hidden{64, 64};
  int updates_per_step = 1;
  int train_every = 1;  // experiences between update rounds
  RewardSpec reward{};

  std::vector<std::string> validate() const;
};

struct UpdateStats {
  double critic_loss = 0;      // mean squared TD error before the step
  double actor_objective = 0;  // mean Q(s, actor(s)) before the step
};

enum class Exploration : std::uint8_t { Explore, Exploit };

// Deterministic-policy actor-critic over the policy network. The discrete
// head is executed by masked argmax and trained through softmax probabilities
// (straight-through); the offer head is trained through the critic directly.
class ActorCritic {
 public:
  ActorCritic(PolicyNetwork actor, const DdpgConfig& cfg, Rng& init_rng);
  // The optimizers hold pointers into the networks.
  ActorCritic(const ActorCritic&) = delete;
  ActorCritic& operator=(const ActorCritic&) = delete;

  // `legal` restricts the argmax; ties go to the earlier ActionKind in
  // canonical order. Offer values are rescaled to [IP_b, RP_b]; explore mode
  // adds Gaussian noise on the unit scale, clipped to the bounds.
  NegotiationAction select_action(const ObservedState& state, ActionSet legal, Exploration mode,
                                  Rng& rng, PolicyAction* chosen = nullptr,
                                  double* offer_unit = nullptr) const;

  UpdateStats update(std::span<const Experience> batch);
  // theta_target <- tau * theta + (1 - tau) * theta_target, both networks.
  void soft_update(double tau);

  // Critic value for a batch of (state, action) columns.
  Matrix q_values(std::span<const Experience> batch, bool target) const;

  PolicyNetwork& actor() { return actor_; }
  const PolicyNetwork& actor() const { return actor_; }
  const PolicyNetwork& target_actor() const { return target_actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& critic() const { return critic_; }
  const Mlp& target_critic() const { return target_critic_; }
  const DdpgConfig& config() const { return cfg_; }
  DdpgConfig& config() { return cfg_; }

  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<ActorCritic> load(const std::filesystem::path& path, const DdpgConfig& cfg);

 private:
  ActorCritic(PolicyNetwork actor, Mlp critic, PolicyNetwork target_actor, Mlp target_critic,
              const DdpgConfig& cfg);
  Matrix greedy_actions(const PolicyOutput& out, const Matrix& states) const;

  DdpgConfig cfg_;
  PolicyNetwork actor_;
  Mlp critic_;
  PolicyNetwork target_actor_;
  Mlp target_critic_;
  Adam actor_opt_;
  Adam critic_opt_;
};

Mlp make_critic(const std::vector<int>& hidden);

// Greedy index over the legal head entries with the canonical kind tie-break.
PolicyAction masked_greedy(const Eigen::Ref<const Eigen::VectorXd>& logits,
                           const std::array<bool, kPolicyActions>& legal);

struct TrainingLogRow {
  std::uint64_t step = 0;
  std::uint64_t episode = 0;
  double reward = 0;
  double critic_loss = 0;
  double actor_objective = 0;
  double noise = 0;
};

inline constexpr std::string_view kTrainingLogHeader =
    "step,episode,reward,critic_loss,actor_objective,epsilon_noise";
std::string format_training_row(const TrainingLogRow& row);

// Focal-buyer policy driven by an actor-critic. With learning enabled it
// records experiences, rewards each action as it is taken and runs updates;
// otherwise it acts greedily and leaves the networks untouched.
class LearningBuyer final : public BuyerPolicy {
 public:
  struct Options {
    bool learning = true;
    Exploration mode = Exploration::Explore;
    bool mask_illegal = true;
    std::uint64_t seed = 1;
  };

  LearningBuyer(ActorCritic& ac, ReplayBuffer* buffer, Options options);

  NegotiationAction decide(const DecisionPoint& point) override;
  void on_thread_closed(ThreadId thread, Millis now, CloseReason reason,
                        std::optional<Price> agreement) override;
  void on_episode_end(const EpisodeResult& result) override;

  // Per-episode bookkeeping for the training log.
  void begin_episode(std::uint64_t episode);
  TrainingLogRow episode_log() const;
  std::uint64_t total_updates() const noexcept { return updates_; }
  std::uint64_t experiences() const noexcept { return pushed_; }

 private:
  struct Pending {
    FeatureVector s{};
    EncodedAction a{};
    double r = 0;  // reward of the action itself (r' for counter-offers)
    Millis t = 0;
    BuyerTerms terms;
  };

  void push(const Experience& e);

  ActorCritic& ac_;
  ReplayBuffer* buffer_;
  Options options_;
  Rng explore_rng_;
  Rng sample_rng_;
  std::unordered_map<ThreadId, Pending> pending_;
  std::uint64_t episode_ = 0;
  std::uint64_t updates_ = 0;
  std::uint64_t pushed_ = 0;
  double episode_reward_ = 0;
  double loss_sum_ = 0;
  double objective_sum_ = 0;
  std::uint64_t episode_updates_ = 0;
};

}  // namespace negsim

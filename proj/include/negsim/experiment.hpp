#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "negsim/dataset.hpp"
#include "negsim/market.hpp"
#include "negsim/metrics.hpp"
#include "negsim/neural.hpp"
#include "negsim/rl.hpp"

namespace negsim {

// Runs `episodes` episodes cycling over `scenarios`; episode i uses
// episode_seed(seed, i), so two campaigns with the same seed face identical
// markets whatever the buyer does. `policy` is reused across episodes.
std::vector<EpisodeResult> run_campaign(BuyerPolicy& policy, const std::vector<Scenario>& scenarios,
                                        std::uint64_t episodes, std::uint64_t seed,
                                        MarketOptions options = {});

// Online actor-critic training over a campaign; returns one log row per
// episode. `results`, when given, receives the training episodes' outcomes.
std::vector<TrainingLogRow> train_actor_critic(ActorCritic& ac, ReplayBuffer& buffer,
                                               const std::vector<Scenario>& scenarios,
                                               std::uint64_t episodes, std::uint64_t seed,
                                               bool mask_illegal = true,
                                               std::vector<EpisodeResult>* results = nullptr);

// Freezes `ac` and plays greedily (no noise, no learning).
std::vector<EpisodeResult> evaluate_actor(ActorCritic& ac, const std::vector<Scenario>& scenarios,
                                          std::uint64_t episodes, std::uint64_t seed);

// Plays a bare policy network greedily through a throwaway critic.
std::vector<EpisodeResult> evaluate_network(const PolicyNetwork& net,
                                            const std::vector<Scenario>& scenarios,
                                            std::uint64_t episodes, std::uint64_t seed);

// Fresh randomly initialized policy network (the RL-from-scratch start).
PolicyNetwork random_policy(std::uint64_t seed);

// Supervised pretraining on teacher data for the given scenarios.
struct SlResult {
  PolicyNetwork net;
  TrainHistory history;
  std::size_t rows = 0;
};
SlResult pretrain(const DatasetSpec& data, const TrainConfig& cfg);

enum class RunMode : std::uint8_t {
  GenData,
  TrainSl,
  TrainRl,
  Evaluate,
  HypothesisA,
  HypothesisB,
  HypothesisC,
};

const char* to_string(RunMode m);
std::optional<RunMode> parse_run_mode(std::string_view text);

enum class IllegalHandling : std::uint8_t { Mask, Abort };

struct ExperimentSpec {
  RunMode mode = RunMode::Evaluate;
  std::uint64_t seed = 1;
  // Unset: full-scale defaults (500 train / 100 test / 500 sweep episodes),
  // divided by `scale`.
  std::optional<std::uint64_t> episodes;
  std::uint64_t scale = 1;
  std::vector<std::string> sellers;  // empty: mode default
  std::optional<std::string> md, mr, zoa, deadline;
  std::optional<std::filesystem::path> sl_checkpoint;
  std::optional<std::filesystem::path> rl_checkpoint;
  std::optional<std::filesystem::path> dataset;  // train-sl input; generated when absent
  std::filesystem::path out = "out";
  IllegalHandling illegal = IllegalHandling::Mask;
  std::string teacher = "default";  // or a parameter file
  TrainConfig sl{};
  DdpgConfig rl{};
  std::uint64_t test_episodes = 100;
  std::uint64_t train_episodes = 500;
  std::uint64_t sweep_episodes = 500;
  std::uint64_t adapt_episodes = 500;
  std::uint64_t dataset_episodes = 500;
};

// All violations, without side effects; empty when the spec is runnable.
std::vector<std::string> validate_spec(const ExperimentSpec& spec);

// Applies a JSON config (same keys as the command-line flags, plus the
// nested "sl" and "rl" hyper-parameter objects). Throws std::invalid_argument.
void apply_config_file(ExperimentSpec& spec, const std::filesystem::path& path);

// Executes the spec, writing artifacts under spec.out. Progress goes to `log`.
// Throws std::runtime_error (or a subclass) on failure.
void run_experiment(const ExperimentSpec& spec, std::ostream& log);

}  // namespace negsim

#pragma once

#include <cstdint>
#include <vector>

#include "negsim/features.hpp"
#include "negsim/market.hpp"
#include "negsim/strategies.hpp"

namespace negsim {

// One market setting paired with the seller population it is run against.
struct Scenario {
  MarketConfig market;
  SellerStrategyId seller = SellerStrategyId::Conceder;
};

// The settings that favour agreements: low density, high ratio, long
// deadlines, 60% and 100% zones of agreement.
std::vector<Scenario> favourable_scenarios(std::vector<SellerStrategyId> sellers);

struct DatasetSpec {
  std::vector<Scenario> scenarios;  // cycled over episodes
  std::uint64_t episodes = 500;
  std::uint64_t seed = 1;
  TeacherParams teacher{};
};

DatasetSpec default_dataset_spec(std::uint64_t seed = 1);

// Seed of episode `index` in a campaign; shared by every strategy evaluated on
// the same campaign so that comparisons are paired.
std::uint64_t episode_seed(std::uint64_t master, std::uint64_t index);

// One row per focal-buyer decision across all episodes, shuffled with the
// spec seed.
Dataset generate_dataset(const DatasetSpec& spec);

}  // namespace negsim

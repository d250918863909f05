#include "negsim/dataset.hpp"

#include <algorithm>
#include <stdexcept>

namespace negsim {

namespace {

class RecordingTeacher final : public BuyerPolicy {
 public:
  RecordingTeacher(const TeacherParams& params, Dataset& out) : params_(params), out_(out) {}

  NegotiationAction decide(const DecisionPoint& p) override {
    const NegotiationAction act = teacher_decide(p.state, *p.thread_state, params_);
    DatasetRow row;
    row.features = encode(p.state);
    row.ip_b = p.state.ip_b;
    row.rp_b = p.state.rp_b;
    const auto label = to_policy_action(act.kind());
    if (!label) throw std::logic_error("teacher chose a non-buyer action");
    row.label_action = *label;
    row.label_offer = act.offer_value();
    out_.push_back(row);
    return act;
  }

 private:
  TeacherParams params_;
  Dataset& out_;
};

}  // namespace

std::vector<Scenario> favourable_scenarios(std::vector<SellerStrategyId> sellers) {
  std::vector<Scenario> out;
  for (auto seller : sellers) {
    for (auto zoa : {Zoa::A60, Zoa::H100}) {
      out.push_back({MarketConfig{Level::L, Level::H, zoa, DeadlineClass::Lg, 0}, seller});
    }
  }
  return out;
}

DatasetSpec default_dataset_spec(std::uint64_t seed) {
  DatasetSpec spec;
  spec.scenarios = favourable_scenarios({SellerStrategyId::Conceder, SellerStrategyId::RelTft});
  spec.seed = seed;
  return spec;
}

std::uint64_t episode_seed(std::uint64_t master, std::uint64_t index) {
  Rng rng = derive_rng(master, 100, index);
  return rng();
}

Dataset generate_dataset(const DatasetSpec& spec) {
  if (spec.scenarios.empty()) throw std::invalid_argument("dataset spec has no scenarios");
  Dataset rows;
  for (std::uint64_t e = 0; e < spec.episodes; ++e) {
    const Scenario& sc = spec.scenarios[e % spec.scenarios.size()];
    MarketConfig cfg = sc.market;
    cfg.seed = episode_seed(spec.seed, e);
    RecordingTeacher teacher(spec.teacher, rows);
    MarketOptions opts;
    opts.episode_id = e;
    opts.competitor_teacher = spec.teacher;
    Market market(cfg, sc.seller, teacher, opts);
    market.run();
  }
  Rng shuffle = derive_rng(spec.seed, 101);
  std::shuffle(rows.begin(), rows.end(), shuffle);
  return rows;
}

}  // namespace negsim

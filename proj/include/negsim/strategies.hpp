#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "negsim/features.hpp"
#include "negsim/protocol.hpp"
#include "negsim/types.hpp"

namespace negsim {

// Polynomial time-dependent concession: alpha(t) = kappa + (1 - kappa) (t/T)^(1/beta).
struct TimeDependentParams {
  double beta = 1.0;
  double kappa = 0.0;

  static TimeDependentParams boulware() { return {0.2, 0.0}; }
  static TimeDependentParams linear() { return {1.0, 0.0}; }
  static TimeDependentParams conceder() { return {5.0, 0.0}; }
};

enum class TftVariant : std::uint8_t { Relative, RandomAbsolute, Averaged };

struct BehaviourDependentParams {
  TftVariant variant = TftVariant::Relative;
  int delta = 1;
  Price noise_bound = 5.0;  // RandomAbsolute only
};

using SellerTactic = std::variant<TimeDependentParams, BehaviourDependentParams>;

// `elapsed` and `horizon` are measured from the start of the seller's thread.
Price seller_time_dependent_offer(const TimeDependentParams& params, Price ip_s, Price rp_s,
                                  Millis elapsed, Millis horizon);

// `buyer_offers` is the buyer's offer history in this thread, oldest first.
Price seller_behaviour_dependent_offer(const BehaviourDependentParams& params,
                                       std::span<const Price> buyer_offers,
                                       std::optional<Price> last_own_offer, Price ip_s, Price rp_s,
                                       Rng& rng);

// What a seller sees of one of its threads when it is asked to act.
struct SellerView {
  ProtocolState protocol;
  std::span<const Price> buyer_offers;
  std::optional<Price> last_own_offer;
  Millis elapsed = 0;
  Millis horizon = 1;
  Price ip_s = 0;
  Price rp_s = 0;
};

// Accepts the buyer's standing offer once it is at least the seller's next
// planned offer; always honours reservation requests.
NegotiationAction seller_decide(const SellerTactic& tactic, const SellerView& view, Rng& rng);

// Seller selection by id. The family ids draw one tactic per seller.
enum class SellerStrategyId : std::uint8_t {
  Conceder,
  Linear,
  Boulware,
  RelTft,
  RandTft,
  AvgTft,
  TimeFamily,
  BehaviourFamily,
};

std::optional<SellerStrategyId> parse_seller_id(std::string_view text);
const char* to_string(SellerStrategyId id);
std::vector<std::string> valid_seller_ids();
SellerTactic make_seller_tactic(SellerStrategyId id, Rng& rng);

struct TeacherParams {
  // Weights on (time pressure, competition, 1 / NS_r); nonnegative, sum to 1.
  std::array<double, 3> concession_weights{0.6, 0.2, 0.2};
  double accept_margin = 0.05;
  double reserve_trigger = 0.1;

  bool valid() const;
};

// Loads `{"concession_weights":[..],"accept_margin":..,"reserve_trigger":..}`.
TeacherParams load_teacher_params(const std::filesystem::path& path);

// Concession fraction in [0, 1] the teacher targets in the current state.
double teacher_concession(const ObservedState& state, const TeacherParams& params);

// Deterministic market-aware buyer heuristic.
NegotiationAction teacher_decide(const ObservedState& state, const NegotiationThreadState& thread,
                                 const TeacherParams& params);

}  // namespace negsim

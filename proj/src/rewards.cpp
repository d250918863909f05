#include "negsim/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace negsim {

std::optional<DiscountVariant> parse_discount_variant(std::string_view text) {
  if (text == "as_written") return DiscountVariant::AsWritten;
  if (text == "inverted") return DiscountVariant::Inverted;
  return std::nullopt;
}

const char* to_string(DiscountVariant v) {
  return v == DiscountVariant::AsWritten ? "as_written" : "inverted";
}

double utility(Price x, Millis t, Price ip_b, Price rp_b, Millis t_end, const RewardSpec& spec) {
  const double frac = static_cast<double>(t) / static_cast<double>(t_end);
  const double base = spec.variant == DiscountVariant::AsWritten ? frac : std::max(0.0, 1.0 - frac);
  return ((rp_b - x) / (rp_b - ip_b)) * std::pow(base, spec.d_t);
}

double metric_utility(Price x, Price ip_b, Price rp_b) { return (rp_b - x) / (rp_b - ip_b); }

namespace {

// Agreements far above RP_b would otherwise push the utility branch below -1.
double bounded(double r) { return std::clamp(r, -1.0, 1.0); }

}  // namespace

double reward_classification(const RewardContext& ctx, Millis t, const BuyerTerms& terms,
                             const RewardSpec& spec) {
  const bool in_time = t <= terms.t_end;
  switch (ctx.kind) {
    case RewardContext::Kind::Agreement:
      return in_time ? bounded(utility(ctx.price, t, terms.ip_b, terms.rp_b, terms.t_end, spec)) : 0.0;
    case RewardContext::Kind::NoDeal:
      return in_time ? -1.0 : 0.0;
    case RewardContext::Kind::CounterOffer:
      return bounded(ctx.counter_reward);
    case RewardContext::Kind::Other:
      return 0.0;
  }
  return 0.0;
}

double reward_regression(Price x, std::span<const Price> seller_offers, Millis t,
                         const BuyerTerms& terms, const RewardSpec& spec) {
  if (t > terms.t_end) return 0.0;
  const bool below_all =
      std::all_of(seller_offers.begin(), seller_offers.end(), [x](Price o) { return x <= o; });
  if (below_all) return bounded(utility(x, t, terms.ip_b, terms.rp_b, terms.t_end, spec));
  const bool above_all =
      std::all_of(seller_offers.begin(), seller_offers.end(), [x](Price o) { return x > o; });
  if (above_all) return -1.0;
  return 0.0;
}

}  // namespace negsim

#pragma once

#include <span>
#include <string_view>
#include <optional>

#include "negsim/types.hpp"

namespace negsim {

enum class DiscountVariant : std::uint8_t {
  AsWritten,  // (t / t_end)^d
  Inverted,   // (1 - t / t_end)^d
};

std::optional<DiscountVariant> parse_discount_variant(std::string_view text);
const char* to_string(DiscountVariant v);

struct RewardSpec {
  double d_t = 0.6;
  DiscountVariant variant = DiscountVariant::AsWritten;
};

// Discounted buyer utility ((rp - x) / (rp - ip)) * time_factor(t).
double utility(Price x, Millis t, Price ip_b, Price rp_b, Millis t_end, const RewardSpec& spec = {});

// Undiscounted utility used for reporting.
double metric_utility(Price x, Price ip_b, Price rp_b);

// Outcome context of one buyer action for the classification reward.
struct RewardContext {
  enum class Kind : std::uint8_t { Agreement, NoDeal, CounterOffer, Other };
  Kind kind = Kind::Other;
  Price price = 0;             // agreement price
  double counter_reward = 0;   // r' for counter-offers
};

struct BuyerTerms {
  Price ip_b = 0;
  Price rp_b = 0;
  Millis t_end = 1;
};

double reward_classification(const RewardContext& ctx, Millis t, const BuyerTerms& terms,
                             const RewardSpec& spec = {});

// `seller_offers` holds each active seller's current preferred offer. Offers
// strictly between the minimum and the maximum fall to the 0 branch; an empty
// list satisfies the "below every offer" guard vacuously.
double reward_regression(Price x, std::span<const Price> seller_offers, Millis t,
                         const BuyerTerms& terms, const RewardSpec& spec = {});

}  // namespace negsim

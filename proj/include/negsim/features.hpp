#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "negsim/protocol.hpp"
#include "negsim/types.hpp"

namespace negsim {

// The buyer's view of one thread at a decision point.
struct ObservedState {
  int ns_r = 1;      // sellers b currently negotiates with
  int nc_r = 0;      // competing buyers sharing at least one of those sellers
  Stage s_neg = Stage::S1;
  Price x_best = 0;  // best (lowest) offer exchanged in the thread
  Millis t_left = 0; // t_end minus the seller's last action time
  Price ip_b = 0;
  Price rp_b = 0;
  Millis t_end = 1;  // buyer's own negotiation length; private
};

// Global scales shared by every market setting so that encodings transfer
// across configurations.
inline constexpr double kMaxPopulation = 50.0;
inline constexpr double kPriceFloor = 300.0;
inline constexpr double kPriceCeiling = 730.0;

inline constexpr std::size_t kFeatureDim = 10;
using FeatureVector = std::array<double, kFeatureDim>;

inline constexpr std::string_view kFeatureNames[kFeatureDim] = {
    "ns_r", "nc_r", "s1", "s2", "s3", "s4", "x_best", "t_left", "ip_b", "rp_b"};

double normalize_price(Price p);
Price denormalize_price(double v);

// ns_r, nc_r scaled by 1/50; stage one-hot over S1..S4 (S5 encodes as all
// zeros); prices mapped by (v - 300) / 430; t_left by 1 / t_end.
FeatureVector encode(const ObservedState& state);

// Discrete decisions of the buyer policy, in head order.
enum class PolicyAction : std::uint8_t { CounterOffer, Accept, Confirm, ReqToReserve, Exit };
inline constexpr std::size_t kPolicyActions = 5;

const char* to_string(PolicyAction a);
std::optional<PolicyAction> parse_policy_action(std::string_view text);
ActionKind to_action_kind(PolicyAction a);
std::optional<PolicyAction> to_policy_action(ActionKind k);

// Buyer decisions only ever happen at S1, S2 (buyer turn) or S4; the stage
// one-hot therefore determines the legal head entries.
std::array<bool, kPolicyActions> legal_policy_mask(const ProtocolState& state);
std::array<bool, kPolicyActions> legal_policy_mask(const FeatureVector& features);

struct DatasetRow {
  FeatureVector features{};
  PolicyAction label_action = PolicyAction::CounterOffer;
  std::optional<Price> label_offer;  // present iff label_action == CounterOffer
  Price ip_b = 0;
  Price rp_b = 0;

  // Offer label on the unit scale of the offer head.
  std::optional<double> offer_unit() const;
};

using Dataset = std::vector<DatasetRow>;

inline constexpr std::string_view kDatasetHeader =
    "ns_r,nc_r,s1,s2,s3,s4,x_best,t_left,ip_b,rp_b,label_action,label_offer";

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path);

struct CorrelationReport {
  std::vector<std::vector<double>> matrix;
  std::vector<bool> degenerate;  // constant columns; their coefficients are 0
  std::vector<std::string> names;

  double max_off_diagonal() const;
};

// Columns are the inner vectors' positions; needs at least two rows.
CorrelationReport pearson_matrix(std::span<const std::vector<double>> rows,
                                 std::vector<std::string> names = {});

// Audit over the seven raw state attributes (stage as its ordinal) of every
// dataset row.
CorrelationReport attribute_correlation(const Dataset& data);

void write_correlation_csv(const CorrelationReport& report, const std::filesystem::path& path);

}  // namespace negsim

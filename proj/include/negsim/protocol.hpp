#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "negsim/types.hpp"

namespace negsim {

// Canonical kind order. Tie-breaks between kinds always follow this order.
enum class ActionKind : std::uint8_t { Offer, ReqToReserve, Reserve, Cancel, Confirm, Accept, Exit };

inline constexpr std::array<ActionKind, 7> kAllActionKinds = {
    ActionKind::Offer,   ActionKind::ReqToReserve, ActionKind::Reserve, ActionKind::Cancel,
    ActionKind::Confirm, ActionKind::Accept,       ActionKind::Exit};

const char* to_string(ActionKind kind);
std::optional<ActionKind> parse_action_kind(std::string_view text);

class NegotiationAction {
 public:
  static NegotiationAction offer(Price value);
  static NegotiationAction make(ActionKind kind);

  ActionKind kind() const noexcept { return kind_; }
  // Present iff kind() == Offer.
  std::optional<Price> offer_value() const noexcept { return offer_; }

  bool operator==(const NegotiationAction&) const = default;

 private:
  NegotiationAction(ActionKind kind, std::optional<Price> offer) : kind_(kind), offer_(offer) {}
  ActionKind kind_;
  std::optional<Price> offer_;
};

// S1: awaiting the buyer's opening offer.
// S2: offer exchange (buyer offer awaiting seller response, or seller counter
//     awaiting buyer response).
// S3: buyer requested a reservation, awaiting the seller's Reserve.
// S4: offer reserved, awaiting buyer Confirm/Cancel.
// S5: terminal.
enum class Stage : std::uint8_t { S1, S2, S3, S4, S5 };
enum class Turn : std::uint8_t { Buyer, Seller };
enum class Outcome : std::uint8_t { Open, Agreement, NoDeal };

const char* to_string(Stage stage);
const char* to_string(Outcome outcome);

struct ProtocolState {
  Stage stage = Stage::S1;
  Turn turn = Turn::Buyer;
  Outcome outcome = Outcome::Open;

  static ProtocolState initial() { return {}; }
  static ProtocolState terminal(Outcome outcome) { return {Stage::S5, Turn::Buyer, outcome}; }

  bool is_terminal() const noexcept { return stage == Stage::S5; }
  bool operator==(const ProtocolState&) const = default;
};

// Small value set of action kinds, iterated in canonical order.
class ActionSet {
 public:
  constexpr ActionSet() = default;
  constexpr ActionSet(std::initializer_list<ActionKind> kinds) {
    for (auto k : kinds) insert(k);
  }
  constexpr void insert(ActionKind k) { bits_ |= bit(k); }
  constexpr void erase(ActionKind k) { bits_ &= static_cast<std::uint8_t>(~bit(k)); }
  constexpr bool contains(ActionKind k) const { return (bits_ & bit(k)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  int size() const;
  std::vector<ActionKind> kinds() const;
  constexpr bool operator==(const ActionSet&) const = default;

 private:
  static constexpr std::uint8_t bit(ActionKind k) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(k));
  }
  std::uint8_t bits_ = 0;
};

class IllegalAction : public std::logic_error {
 public:
  IllegalAction(ProtocolState state, ActionKind kind, Role actor);
  ProtocolState state;
  ActionKind kind;
  Role actor;
};

ActionSet legal_actions(ProtocolState state, Role actor);

// Throws IllegalAction when the kind is not in legal_actions(state, actor).
ProtocolState transition(ProtocolState state, const NegotiationAction& action, Role actor);

// Times t <= t_end are within the deadline.
ProtocolState deadline_check(Millis now, Millis t_end, ProtocolState state);

// One buyer<->seller dialogue.
struct NegotiationThreadState {
  AgentId seller_id = 0;
  ProtocolState protocol;
  // Minimum of all offers exchanged so far; absent until the first offer.
  std::optional<Price> x_best;
  std::optional<Price> last_seller_offer;
  std::optional<Price> last_buyer_offer;
  Millis start_time = 0;
  std::optional<Millis> last_seller_action_time;
  // Present only at S3/S4: the seller offer the buyer asked to reserve.
  std::optional<Price> reserved_offer;

  // Applies `action` through `transition` and maintains the offer bookkeeping.
  // Returns the agreement price when the action concludes a deal.
  std::optional<Price> apply(const NegotiationAction& action, Role actor, Millis now);
  // Forces the thread to S5/NoDeal (deadline, departure).
  void close_no_deal();
};

// CSV trace of protocol transitions.
struct TraceRow {
  std::uint64_t episode_id = 0;
  ThreadId thread_id = 0;
  Millis time_ms = 0;
  std::string actor;
  ActionKind kind = ActionKind::Exit;
  std::optional<Price> offer;
  Stage stage_after = Stage::S1;
};

inline constexpr std::string_view kTraceHeader =
    "episode_id,thread_id,time_ms,actor,action_kind,offer_value,stage_after";

std::string format_trace_row(const TraceRow& row);

}  // namespace negsim

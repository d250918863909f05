#include "negsim/protocol.hpp"

#include <algorithm>
#include <bit>

#include "negsim/csv.hpp"

namespace negsim {

const char* to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Offer: return "Offer";
    case ActionKind::ReqToReserve: return "ReqToReserve";
    case ActionKind::Reserve: return "Reserve";
    case ActionKind::Cancel: return "Cancel";
    case ActionKind::Confirm: return "Confirm";
    case ActionKind::Accept: return "Accept";
    case ActionKind::Exit: return "Exit";
  }
  return "?";
}

std::optional<ActionKind> parse_action_kind(std::string_view text) {
  for (auto k : kAllActionKinds) {
    if (text == to_string(k)) return k;
  }
  return std::nullopt;
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::S1: return "S1";
    case Stage::S2: return "S2";
    case Stage::S3: return "S3";
    case Stage::S4: return "S4";
    case Stage::S5: return "S5";
  }
  return "?";
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Open: return "Open";
    case Outcome::Agreement: return "Agreement";
    case Outcome::NoDeal: return "NoDeal";
  }
  return "?";
}

NegotiationAction NegotiationAction::offer(Price value) {
  if (!(value > 0.0)) throw std::invalid_argument("offer value must be positive");
  return NegotiationAction(ActionKind::Offer, value);
}

NegotiationAction NegotiationAction::make(ActionKind kind) {
  if (kind == ActionKind::Offer) throw std::invalid_argument("Offer requires a value");
  return NegotiationAction(kind, std::nullopt);
}

int ActionSet::size() const { return std::popcount(bits_); }

std::vector<ActionKind> ActionSet::kinds() const {
  std::vector<ActionKind> out;
  for (auto k : kAllActionKinds) {
    if (contains(k)) out.push_back(k);
  }
  return out;
}

namespace {

std::string illegal_message(ProtocolState s, ActionKind kind, Role actor) {
  return std::string("illegal action ") + to_string(kind) + " by " + to_string(actor) + " at " +
         to_string(s.stage) + (s.turn == Turn::Buyer ? "/BuyerTurn" : "/SellerTurn");
}

Turn other(Turn t) { return t == Turn::Buyer ? Turn::Seller : Turn::Buyer; }

}  // namespace

IllegalAction::IllegalAction(ProtocolState s, ActionKind k, Role a)
    : std::logic_error(illegal_message(s, k, a)), state(s), kind(k), actor(a) {}

ActionSet legal_actions(ProtocolState state, Role actor) {
  if (state.is_terminal()) return {};
  ActionSet out{ActionKind::Exit};
  const bool my_turn = (state.turn == Turn::Buyer) == (actor == Role::Buyer);
  if (!my_turn) return out;

  switch (state.stage) {
    case Stage::S1:
      if (actor == Role::Buyer) out.insert(ActionKind::Offer);
      break;
    case Stage::S2:
      out.insert(ActionKind::Offer);
      out.insert(ActionKind::Accept);
      if (actor == Role::Buyer) out.insert(ActionKind::ReqToReserve);
      break;
    case Stage::S3:
      if (actor == Role::Seller) {
        out.insert(ActionKind::Reserve);
        out.insert(ActionKind::Offer);
      }
      break;
    case Stage::S4:
      if (actor == Role::Buyer) {
        out.insert(ActionKind::Confirm);
        out.insert(ActionKind::Cancel);
      }
      break;
    case Stage::S5:
      break;
  }
  return out;
}

ProtocolState transition(ProtocolState state, const NegotiationAction& action, Role actor) {
  const ActionKind kind = action.kind();
  if (!legal_actions(state, actor).contains(kind)) throw IllegalAction(state, kind, actor);

  switch (kind) {
    case ActionKind::Exit: return ProtocolState::terminal(Outcome::NoDeal);
    case ActionKind::Accept:
    case ActionKind::Confirm: return ProtocolState::terminal(Outcome::Agreement);
    case ActionKind::Offer: return {Stage::S2, other(state.turn), Outcome::Open};
    case ActionKind::ReqToReserve: return {Stage::S3, Turn::Seller, Outcome::Open};
    case ActionKind::Reserve: return {Stage::S4, Turn::Buyer, Outcome::Open};
    case ActionKind::Cancel: return {Stage::S2, Turn::Seller, Outcome::Open};
  }
  throw IllegalAction(state, kind, actor);
}

ProtocolState deadline_check(Millis now, Millis t_end, ProtocolState state) {
  if (now > t_end && !state.is_terminal()) return ProtocolState::terminal(Outcome::NoDeal);
  return state;
}

std::optional<Price> NegotiationThreadState::apply(const NegotiationAction& action, Role actor,
                                                   Millis now) {
  protocol = transition(protocol, action, actor);

  std::optional<Price> agreed;
  switch (action.kind()) {
    case ActionKind::Offer: {
      const Price v = *action.offer_value();
      x_best = x_best ? std::min(*x_best, v) : v;
      (actor == Role::Buyer ? last_buyer_offer : last_seller_offer) = v;
      reserved_offer.reset();
      break;
    }
    case ActionKind::Accept:
      agreed = actor == Role::Buyer ? last_seller_offer : last_buyer_offer;
      break;
    case ActionKind::ReqToReserve: reserved_offer = last_seller_offer; break;
    case ActionKind::Confirm: agreed = reserved_offer; break;
    case ActionKind::Cancel: reserved_offer.reset(); break;
    case ActionKind::Reserve:
    case ActionKind::Exit: break;
  }
  if (actor == Role::Seller) last_seller_action_time = now;
  if (protocol.is_terminal()) reserved_offer.reset();
  return agreed;
}

void NegotiationThreadState::close_no_deal() {
  if (!protocol.is_terminal()) protocol = ProtocolState::terminal(Outcome::NoDeal);
  reserved_offer.reset();
}

std::string format_trace_row(const TraceRow& row) {
  std::string out;
  out += std::to_string(row.episode_id);
  out += ',';
  out += std::to_string(row.thread_id);
  out += ',';
  out += std::to_string(row.time_ms);
  out += ',';
  out += row.actor;
  out += ',';
  out += to_string(row.kind);
  out += ',';
  if (row.offer) out += format_number(*row.offer);
  out += ',';
  out += to_string(row.stage_after);
  return out;
}

}  // namespace negsim

#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "negsim/protocol.hpp"

using namespace negsim;

namespace {

using K = ActionKind;

// Hand-written machine: (stage, turn, actor-on-turn) -> kinds, and successors.
std::set<K> expected_legal(Stage s, Turn turn, Role actor) {
  if (s == Stage::S5) return {};
  const bool on_turn = (turn == Turn::Buyer) == (actor == Role::Buyer);
  if (!on_turn) return {K::Exit};
  const bool buyer = actor == Role::Buyer;
  switch (s) {
    case Stage::S1: return buyer ? std::set<K>{K::Offer, K::Exit} : std::set<K>{K::Exit};
    case Stage::S2:
      return buyer ? std::set<K>{K::Offer, K::ReqToReserve, K::Accept, K::Exit}
                   : std::set<K>{K::Offer, K::Accept, K::Exit};
    case Stage::S3: return buyer ? std::set<K>{K::Exit} : std::set<K>{K::Offer, K::Reserve, K::Exit};
    case Stage::S4:
      return buyer ? std::set<K>{K::Confirm, K::Cancel, K::Exit} : std::set<K>{K::Exit};
    default: return {};
  }
}

std::set<K> as_set(ActionSet a) {
  auto v = a.kinds();
  return {v.begin(), v.end()};
}

NegotiationAction act(K k) { return k == K::Offer ? NegotiationAction::offer(400) : NegotiationAction::make(k); }

const Stage kStages[] = {Stage::S1, Stage::S2, Stage::S3, Stage::S4, Stage::S5};
const Turn kTurns[] = {Turn::Buyer, Turn::Seller};
const Role kRoles[] = {Role::Buyer, Role::Seller};

ProtocolState make_state(Stage s, Turn t) {
  return s == Stage::S5 ? ProtocolState::terminal(Outcome::NoDeal) : ProtocolState{s, t, Outcome::Open};
}

}  // namespace

TEST_CASE("legal actions match the hand-written table everywhere") {
  for (auto s : kStages)
    for (auto t : kTurns)
      for (auto r : kRoles) {
        CAPTURE(to_string(s));
        CHECK(as_set(legal_actions(make_state(s, t), r)) == expected_legal(s, t, r));
      }
}

TEST_CASE("documented legal sets") {
  CHECK(legal_actions(ProtocolState::terminal(Outcome::Agreement), Role::Buyer).empty());
  CHECK(as_set(legal_actions(ProtocolState::initial(), Role::Buyer)) == std::set<K>{K::Offer, K::Exit});
  CHECK(as_set(legal_actions({Stage::S4, Turn::Buyer, Outcome::Open}, Role::Buyer)) ==
        std::set<K>{K::Confirm, K::Cancel, K::Exit});
}

TEST_CASE("transition examples") {
  const auto exited = transition({Stage::S2, Turn::Buyer, Outcome::Open}, act(K::Exit), Role::Buyer);
  CHECK(exited == ProtocolState::terminal(Outcome::NoDeal));
  const auto offered = transition(ProtocolState::initial(), NegotiationAction::offer(320), Role::Buyer);
  CHECK(offered == ProtocolState{Stage::S2, Turn::Seller, Outcome::Open});
  const auto confirmed = transition({Stage::S4, Turn::Buyer, Outcome::Open}, act(K::Confirm), Role::Buyer);
  CHECK(confirmed == ProtocolState::terminal(Outcome::Agreement));
  const auto cancelled = transition({Stage::S4, Turn::Buyer, Outcome::Open}, act(K::Cancel), Role::Buyer);
  CHECK(cancelled == ProtocolState{Stage::S2, Turn::Seller, Outcome::Open});
  const auto reserved = transition({Stage::S3, Turn::Seller, Outcome::Open}, act(K::Reserve), Role::Seller);
  CHECK(reserved == ProtocolState{Stage::S4, Turn::Buyer, Outcome::Open});
  const auto accepted = transition({Stage::S2, Turn::Seller, Outcome::Open}, act(K::Accept), Role::Seller);
  CHECK(accepted == ProtocolState::terminal(Outcome::Agreement));
}

TEST_CASE("illegal kinds throw and carry context") {
  try {
    transition(ProtocolState::initial(), act(K::Confirm), Role::Buyer);
    FAIL("expected IllegalAction");
  } catch (const IllegalAction& e) {
    CHECK(e.kind == K::Confirm);
    CHECK(e.actor == Role::Buyer);
    CHECK(e.state == ProtocolState::initial());
  }
  for (auto k : kAllActionKinds) {
    CHECK_THROWS_AS(transition(ProtocolState::terminal(Outcome::NoDeal), act(k), Role::Buyer), IllegalAction);
  }
}

TEST_CASE("closure: every legal kind transitions without throwing, turns alternate") {
  for (auto s : kStages)
    for (auto t : kTurns)
      for (auto r : kRoles) {
        const auto st = make_state(s, t);
        for (auto k : kAllActionKinds) {
          const bool legal = legal_actions(st, r).contains(k);
          if (!legal) {
            CHECK_THROWS_AS(transition(st, act(k), r), IllegalAction);
            continue;
          }
          const auto next = transition(st, act(k), r);
          CHECK((next.outcome == Outcome::Open) == (next.stage != Stage::S5));
          if (!next.is_terminal()) CHECK(next.turn != st.turn);
        }
      }
}

TEST_CASE("random legal walks always terminate") {
  std::mt19937_64 rng(7);
  for (int episode = 0; episode < 2000; ++episode) {
    ProtocolState st = ProtocolState::initial();
    int steps = 0;
    while (!st.is_terminal()) {
      // The party on turn acts; an Exit by either side is always possible.
      const Role r = st.turn == Turn::Buyer ? Role::Buyer : Role::Seller;
      auto kinds = legal_actions(st, r).kinds();
      REQUIRE_FALSE(kinds.empty());
      st = transition(st, act(kinds[rng() % kinds.size()]), r);
      if (++steps > 50) st = deadline_check(1001, 1000, st);
    }
    CHECK(legal_actions(st, Role::Buyer).empty());
    CHECK(legal_actions(st, Role::Seller).empty());
  }
}

TEST_CASE("deadline check boundary") {
  const ProtocolState s1 = ProtocolState::initial();
  const ProtocolState s2{Stage::S2, Turn::Seller, Outcome::Open};
  CHECK(deadline_check(0, 90000, s1) == s1);
  CHECK(deadline_check(90001, 90000, s2) == ProtocolState::terminal(Outcome::NoDeal));
  CHECK(deadline_check(90000, 90000, s2) == s2);
  const auto done = ProtocolState::terminal(Outcome::Agreement);
  CHECK(deadline_check(1 << 30, 90000, done) == done);
}

TEST_CASE("offer values must be positive") {
  CHECK_THROWS_AS(NegotiationAction::offer(0), std::invalid_argument);
  CHECK_THROWS_AS(NegotiationAction::make(K::Offer), std::invalid_argument);
  CHECK_FALSE(NegotiationAction::make(K::Exit).offer_value());
  CHECK(*NegotiationAction::offer(12.5).offer_value() == 12.5);
}

TEST_CASE("thread bookkeeping tracks the minimum offer and the reservation") {
  NegotiationThreadState th;
  CHECK_FALSE(th.apply(NegotiationAction::offer(320), Role::Buyer, 0));
  th.apply(NegotiationAction::offer(600), Role::Seller, 500);
  CHECK(*th.x_best == 320);
  CHECK(*th.last_seller_offer == 600);
  CHECK(*th.last_seller_action_time == 500);
  th.apply(act(K::ReqToReserve), Role::Buyer, 1000);
  CHECK(*th.reserved_offer == 600);
  th.apply(act(K::Reserve), Role::Seller, 1500);
  CHECK(th.protocol.stage == Stage::S4);
  const auto agreed = th.apply(act(K::Confirm), Role::Buyer, 2000);
  REQUIRE(agreed);
  CHECK(*agreed == 600);
  CHECK_FALSE(th.reserved_offer);
  CHECK(th.protocol.outcome == Outcome::Agreement);
}

TEST_CASE("buyer accept agrees at the seller's last offer") {
  NegotiationThreadState th;
  th.apply(NegotiationAction::offer(320), Role::Buyer, 0);
  th.apply(NegotiationAction::offer(450), Role::Seller, 500);
  CHECK(*th.apply(act(K::Accept), Role::Buyer, 1000) == 450);
}

TEST_CASE("trace row format") {
  TraceRow row{3, 7, 1500, "buyer", K::Offer, 412.5, Stage::S2};
  CHECK(format_trace_row(row) == "3,7,1500,buyer,Offer,412.5,S2");
  row.kind = K::Exit;
  row.offer.reset();
  row.stage_after = Stage::S5;
  CHECK(format_trace_row(row) == "3,7,1500,buyer,Exit,,S5");
  CHECK(*parse_action_kind("ReqToReserve") == K::ReqToReserve);
  CHECK_FALSE(parse_action_kind("reserve"));
}

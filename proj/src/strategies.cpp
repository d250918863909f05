#include "negsim/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace negsim {

Price seller_time_dependent_offer(const TimeDependentParams& params, Price ip_s, Price rp_s,
                                  Millis elapsed, Millis horizon) {
  const double frac =
      horizon > 0 ? std::clamp(static_cast<double>(elapsed) / static_cast<double>(horizon), 0.0, 1.0)
                  : 1.0;
  const double alpha = params.kappa + (1.0 - params.kappa) * std::pow(frac, 1.0 / params.beta);
  return std::clamp(ip_s - alpha * (ip_s - rp_s), rp_s, ip_s);
}

Price seller_behaviour_dependent_offer(const BehaviourDependentParams& params,
                                       std::span<const Price> buyer_offers,
                                       std::optional<Price> last_own_offer, Price ip_s, Price rp_s,
                                       Rng& rng) {
  const Price base = last_own_offer.value_or(ip_s);
  const std::size_t d = static_cast<std::size_t>(std::max(1, params.delta));
  const std::size_t m = buyer_offers.size();
  if (m < 2 * d) return std::clamp(base, rp_s, ip_s);

  // Faratin indexing over the buyer's own offers: the pair of consecutive
  // offers `delta` moves back.
  const Price older = buyer_offers[m - 1 - d];
  const Price newer = buyer_offers[m - d];
  Price next = base;
  switch (params.variant) {
    case TftVariant::Relative:
      next = base * (older / newer);
      break;
    case TftVariant::RandomAbsolute:
      next = base - (newer - older) +
             (params.noise_bound > 0 ? uniform(rng, -params.noise_bound, params.noise_bound) : 0.0);
      break;
    case TftVariant::Averaged:
      next = base * (older / buyer_offers[m - 1]);
      break;
  }
  return std::clamp(next, rp_s, ip_s);
}

NegotiationAction seller_decide(const SellerTactic& tactic, const SellerView& view, Rng& rng) {
  const ActionSet legal = legal_actions(view.protocol, Role::Seller);
  if (legal.contains(ActionKind::Reserve)) return NegotiationAction::make(ActionKind::Reserve);
  if (!legal.contains(ActionKind::Offer)) return NegotiationAction::make(ActionKind::Exit);

  const Price next = std::visit(
      [&](const auto& p) -> Price {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TimeDependentParams>) {
          return seller_time_dependent_offer(p, view.ip_s, view.rp_s, view.elapsed, view.horizon);
        } else {
          return seller_behaviour_dependent_offer(p, view.buyer_offers, view.last_own_offer,
                                                  view.ip_s, view.rp_s, rng);
        }
      },
      tactic);

  if (legal.contains(ActionKind::Accept) && !view.buyer_offers.empty() &&
      view.buyer_offers.back() >= next) {
    return NegotiationAction::make(ActionKind::Accept);
  }
  return NegotiationAction::offer(next);
}

namespace {

struct SellerIdName {
  SellerStrategyId id;
  const char* name;
};

constexpr SellerIdName kSellerIds[] = {
    {SellerStrategyId::Conceder, "conceder"},     {SellerStrategyId::Linear, "linear"},
    {SellerStrategyId::Boulware, "boulware"},     {SellerStrategyId::RelTft, "rel_tft"},
    {SellerStrategyId::RandTft, "rand_tft"},      {SellerStrategyId::AvgTft, "avg_tft"},
    {SellerStrategyId::TimeFamily, "time"},       {SellerStrategyId::BehaviourFamily, "behaviour"},
};

}  // namespace

std::optional<SellerStrategyId> parse_seller_id(std::string_view text) {
  for (const auto& e : kSellerIds) {
    if (text == e.name) return e.id;
  }
  return std::nullopt;
}

const char* to_string(SellerStrategyId id) {
  for (const auto& e : kSellerIds) {
    if (e.id == id) return e.name;
  }
  return "?";
}

std::vector<std::string> valid_seller_ids() {
  std::vector<std::string> out;
  for (const auto& e : kSellerIds) out.emplace_back(e.name);
  return out;
}

SellerTactic make_seller_tactic(SellerStrategyId id, Rng& rng) {
  switch (id) {
    case SellerStrategyId::Conceder: return TimeDependentParams::conceder();
    case SellerStrategyId::Linear: return TimeDependentParams::linear();
    case SellerStrategyId::Boulware: return TimeDependentParams::boulware();
    case SellerStrategyId::RelTft: return BehaviourDependentParams{TftVariant::Relative, 1, 0.0};
    case SellerStrategyId::RandTft:
      return BehaviourDependentParams{TftVariant::RandomAbsolute, 1, 5.0};
    // With a window of one move the averaged variant coincides with the
    // relative one.
    case SellerStrategyId::AvgTft: return BehaviourDependentParams{TftVariant::Averaged, 2, 0.0};
    case SellerStrategyId::TimeFamily: {
      constexpr SellerStrategyId members[] = {SellerStrategyId::Conceder, SellerStrategyId::Linear,
                                              SellerStrategyId::Boulware};
      return make_seller_tactic(members[std::uniform_int_distribution<int>(0, 2)(rng)], rng);
    }
    case SellerStrategyId::BehaviourFamily: {
      constexpr SellerStrategyId members[] = {SellerStrategyId::RelTft, SellerStrategyId::RandTft,
                                              SellerStrategyId::AvgTft};
      return make_seller_tactic(members[std::uniform_int_distribution<int>(0, 2)(rng)], rng);
    }
  }
  throw std::invalid_argument("unknown seller strategy");
}

bool TeacherParams::valid() const {
  double sum = 0;
  for (double w : concession_weights) {
    if (!(w >= 0.0)) return false;
    sum += w;
  }
  return std::abs(sum - 1.0) < 1e-9 && accept_margin >= 0.0 && reserve_trigger >= 0.0 &&
         reserve_trigger <= 1.0;
}

TeacherParams load_teacher_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read teacher params " + path.string());
  const auto j = nlohmann::json::parse(in);
  TeacherParams p;
  if (j.contains("concession_weights")) {
    const auto w = j.at("concession_weights").get<std::vector<double>>();
    if (w.size() != 3) throw std::runtime_error("concession_weights needs three entries");
    std::copy(w.begin(), w.end(), p.concession_weights.begin());
  }
  p.accept_margin = j.value("accept_margin", p.accept_margin);
  p.reserve_trigger = j.value("reserve_trigger", p.reserve_trigger);
  if (!p.valid()) throw std::runtime_error("invalid teacher params in " + path.string());
  return p;
}

double teacher_concession(const ObservedState& s, const TeacherParams& p) {
  const double t_end = static_cast<double>(std::max<Millis>(1, s.t_end));
  const double time_pressure = std::clamp(1.0 - static_cast<double>(s.t_left) / t_end, 0.0, 1.0);
  const int ns = std::max(1, s.ns_r);
  const double competition =
      static_cast<double>(s.nc_r) / static_cast<double>(s.nc_r + ns);
  const double scarcity = 1.0 / static_cast<double>(ns);
  const auto& w = p.concession_weights;
  return std::clamp(w[0] * time_pressure + w[1] * competition + w[2] * scarcity, 0.0, 1.0);
}

NegotiationAction teacher_decide(const ObservedState& s, const NegotiationThreadState& thread,
                                 const TeacherParams& p) {
  const ActionSet legal = legal_actions(thread.protocol, Role::Buyer);
  if (legal.contains(ActionKind::Confirm)) return NegotiationAction::make(ActionKind::Confirm);

  const Price span = s.rp_b - s.ip_b;
  const Price target = s.ip_b + teacher_concession(s, p) * span;

  if (legal.contains(ActionKind::Accept) && thread.last_seller_offer) {
    const Price seller = *thread.last_seller_offer;
    const Price accept_below = std::min(s.rp_b, target + p.accept_margin * span);
    if (seller <= accept_below) return NegotiationAction::make(ActionKind::Accept);
    const double t_end = static_cast<double>(std::max<Millis>(1, s.t_end));
    if (legal.contains(ActionKind::ReqToReserve) && seller <= s.rp_b &&
        static_cast<double>(s.t_left) < p.reserve_trigger * t_end) {
      return NegotiationAction::make(ActionKind::ReqToReserve);
    }
    if (s.t_left <= 0 && seller > s.rp_b) return NegotiationAction::make(ActionKind::Exit);
  }
  if (legal.contains(ActionKind::Offer)) return NegotiationAction::offer(target);
  return NegotiationAction::make(ActionKind::Exit);
}

}  // namespace negsim

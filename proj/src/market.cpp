#include "negsim/market.hpp"

#include <algorithm>
#include <cmath>

#include "negsim/rewards.hpp"

namespace negsim {

const char* to_string(Level v) {
  switch (v) {
    case Level::H: return "H";
    case Level::A: return "A";
    case Level::L: return "L";
  }
  return "?";
}

const char* to_string(Zoa v) {
  switch (v) {
    case Zoa::H100: return "100";
    case Zoa::A60: return "60";
    case Zoa::L10: return "10";
  }
  return "?";
}

const char* to_string(DeadlineClass v) {
  switch (v) {
    case DeadlineClass::Lg: return "Lg";
    case DeadlineClass::A: return "A";
    case DeadlineClass::Sh: return "Sh";
  }
  return "?";
}

std::optional<Level> parse_level(std::string_view t) {
  if (t == "H") return Level::H;
  if (t == "A") return Level::A;
  if (t == "L") return Level::L;
  return std::nullopt;
}

std::optional<Zoa> parse_zoa(std::string_view t) {
  if (t == "100" || t == "H" || t == "H100") return Zoa::H100;
  if (t == "60" || t == "A" || t == "A60") return Zoa::A60;
  if (t == "10" || t == "L" || t == "L10") return Zoa::L10;
  return std::nullopt;
}

std::optional<DeadlineClass> parse_deadline(std::string_view t) {
  if (t == "Lg") return DeadlineClass::Lg;
  if (t == "A") return DeadlineClass::A;
  if (t == "Sh") return DeadlineClass::Sh;
  return std::nullopt;
}

std::vector<MarketConfig> all_market_settings(std::uint64_t seed) {
  std::vector<MarketConfig> out;
  for (auto md : kAllLevels)
    for (auto mr : kAllLevels)
      for (auto zoa : kAllZoas)
        for (auto d : kAllDeadlines) out.push_back({md, mr, zoa, d, seed});
  return out;
}

SellerPriceRanges seller_price_ranges(Zoa zoa) {
  switch (zoa) {
    case Zoa::H100: return {{500, 550}, {300, 350}};
    case Zoa::A60: return {{580, 630}, {380, 430}};
    case Zoa::L10: return {{680, 730}, {480, 530}};
  }
  return {};
}

PriceRange deadline_range_ms(DeadlineClass d) {
  switch (d) {
    case DeadlineClass::Lg: return {151000, 210000};
    case DeadlineClass::A: return {91000, 150000};
    case DeadlineClass::Sh: return {30000, 90000};
  }
  return {};
}

std::array<int, 3> density_values(Level md) {
  switch (md) {
    case Level::H: return {30, 40, 50};
    case Level::A: return {18, 23, 28};
    case Level::L: return {8, 10, 12};
  }
  return {};
}

std::array<std::pair<int, int>, 3> ratio_values(Level mr) {
  switch (mr) {
    case Level::H: return {{{10, 1}, {1, 1}, {1, 10}}};
    case Level::A: return {{{5, 1}, {1, 1}, {1, 5}}};
    case Level::L: return {{{2, 1}, {1, 1}, {1, 2}}};
  }
  return {};
}

namespace {

int pick3(Rng& rng) { return std::uniform_int_distribution<int>(0, 2)(rng); }

Millis sample_deadline(DeadlineClass d, Rng& rng) {
  const auto r = deadline_range_ms(d);
  return std::uniform_int_distribution<Millis>(static_cast<Millis>(r.lo),
                                               static_cast<Millis>(r.hi))(rng);
}

bool bernoulli(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

}  // namespace

SampledMarket sample_market(const MarketConfig& c, Rng& rng) {
  SampledMarket m;
  m.max_agents = density_values(c.md)[pick3(rng)];
  const auto ratio = ratio_values(c.mr)[pick3(rng)];
  m.ratio_buyers = ratio.first;
  m.ratio_sellers = ratio.second;
  m.ip_b = uniform(rng, kBuyerIpRange.lo, kBuyerIpRange.hi);
  m.rp_b = uniform(rng, kBuyerRpRange.lo, kBuyerRpRange.hi);
  m.t_end = sample_deadline(c.deadline_class, rng);
  m.zoa = c.zoa;
  m.deadline_class = c.deadline_class;
  return m;
}

bool event_after(const MarketEvent& a, const MarketEvent& b) {
  if (a.time != b.time) return a.time > b.time;
  if (a.agent != b.agent) return a.agent > b.agent;
  const ThreadId ta = a.thread.value_or(0), tb = b.thread.value_or(0);
  if (ta != tb) return ta > tb;
  if (a.kind != b.kind) return a.kind > b.kind;
  return a.seq > b.seq;
}

NegotiationAction TeacherPolicy::decide(const DecisionPoint& p) {
  return teacher_decide(p.state, *p.thread_state, params_);
}

Market::Market(const MarketConfig& config, SellerStrategyId sellers, BuyerPolicy& focal,
               MarketOptions options)
    : config_(config),
      seller_id_(sellers),
      focal_(focal),
      options_(options),
      sample_rng_(derive_rng(config.seed, 1)),
      churn_rng_(derive_rng(config.seed, 2)),
      latency_rng_(derive_rng(config.seed, 3)),
      seller_rng_(derive_rng(config.seed, 4)) {
  sampled_ = sample_market(config_, sample_rng_);
  sampled_.turn_latency = options_.latency_base;
  result_.episode_id = options_.episode_id;

  const int md = sampled_.max_agents;
  const double buyer_share = static_cast<double>(sampled_.ratio_buyers) /
                             static_cast<double>(sampled_.ratio_buyers + sampled_.ratio_sellers);
  const int n_buyers = std::clamp(static_cast<int>(std::lround(md * buyer_share)), 1, md - 1);
  const int n_sellers = md - n_buyers;

  create_buyer(sampled_.ip_b, sampled_.rp_b, 0, sampled_.t_end);
  for (int i = 0; i < n_sellers; ++i) create_random(0);
  for (int i = 1; i < n_buyers; ++i) {
    create_buyer(uniform(sample_rng_, kBuyerIpRange.lo, kBuyerIpRange.hi),
                 uniform(sample_rng_, kBuyerRpRange.lo, kBuyerRpRange.hi), 0,
                 sample_deadline(config_.deadline_class, sample_rng_));
  }
  for (AgentId id = 0; id < agents_.size(); ++id) enter(id, 0);
}

AgentId Market::create_buyer(Price ip, Price rp, Millis start, Millis t_b) {
  Agent a;
  a.role = Role::Buyer;
  a.ip = ip;
  a.rp = rp;
  a.start = start;
  a.t_end = start + t_b;
  a.pending = true;
  agents_.push_back(std::move(a));
  stamp_.push_back(0);
  return static_cast<AgentId>(agents_.size() - 1);
}

AgentId Market::create_seller(Price ip, Price rp, SellerTactic tactic) {
  Agent a;
  a.role = Role::Seller;
  a.ip = ip;
  a.rp = rp;
  a.tactic = tactic;
  a.pending = true;
  agents_.push_back(std::move(a));
  stamp_.push_back(0);
  return static_cast<AgentId>(agents_.size() - 1);
}

AgentId Market::create_random(Millis start) {
  const auto ranges = seller_price_ranges(sampled_.zoa);
  auto make_seller = [&] {
    const Price ip = uniform(sample_rng_, ranges.ip.lo, ranges.ip.hi);
    const Price rp = uniform(sample_rng_, ranges.rp.lo, ranges.rp.hi);
    return create_seller(ip, rp, make_seller_tactic(seller_id_, sample_rng_));
  };
  if (start == 0) return make_seller();  // initial population
  const double buyer_share = static_cast<double>(sampled_.ratio_buyers) /
                             static_cast<double>(sampled_.ratio_buyers + sampled_.ratio_sellers);
  if (bernoulli(sample_rng_, buyer_share)) {
    return create_buyer(uniform(sample_rng_, kBuyerIpRange.lo, kBuyerIpRange.hi),
                        uniform(sample_rng_, kBuyerRpRange.lo, kBuyerRpRange.hi), start,
                        sample_deadline(config_.deadline_class, sample_rng_));
  }
  return make_seller();
}

void Market::enter(AgentId id, Millis now) {
  Agent& a = agents_[id];
  if (!a.pending) return;
  a.pending = false;
  a.live = true;
  ++live_count_;
  for (AgentId other = 0; other < agents_.size(); ++other) {
    if (other == id || !agents_[other].live || agents_[other].role == a.role) continue;
    if (a.role == Role::Buyer) {
      open_thread(id, other, now);
    } else {
      open_thread(other, id, now);
    }
  }
  if (a.role == Role::Buyer) schedule(a.t_end + 1, EventKind::AgentLeave, id);
}

AgentId Market::spawn_seller(Price ip_s, Price rp_s, SellerTactic tactic) {
  const AgentId id = create_seller(ip_s, rp_s, tactic);
  enter(id, now_);
  return id;
}

void Market::open_thread(AgentId buyer, AgentId seller, Millis now) {
  Thread th;
  th.buyer = buyer;
  th.seller = seller;
  th.t_end = agents_[buyer].t_end;
  th.state.seller_id = seller;
  th.state.start_time = now;
  const auto id = static_cast<ThreadId>(threads_.size());
  threads_.push_back(std::move(th));
  agents_[buyer].threads.push_back(id);
  agents_[seller].threads.push_back(id);
  ++topology_;
  schedule_buyer(id, now);
}

void Market::schedule(Millis time, EventKind kind, AgentId agent, std::optional<ThreadId> thread) {
  queue_.push(MarketEvent{time, kind, agent, thread, seq_++});
}

Millis Market::latency() {
  const Millis j = options_.latency_jitter;
  return options_.latency_base +
         (j > 0 ? std::uniform_int_distribution<Millis>(-j, j)(latency_rng_) : 0);
}

void Market::schedule_buyer(ThreadId id, Millis after) {
  schedule(after + latency(), EventKind::ActionDue, threads_[id].buyer, id);
}

void Market::schedule_seller(ThreadId id, Millis after) {
  Agent& s = agents_[threads_[id].seller];
  const Millis at = std::max(after, s.free_at) + latency();
  s.free_at = at;
  schedule(at, EventKind::ActionDue, threads_[id].seller, id);
}

void Market::run_trials(Millis at) {
  int occupied = 0;
  for (const auto& a : agents_) occupied += (a.live || a.pending) ? 1 : 0;
  const int vacancies = sampled_.max_agents - occupied;
  for (int v = 0; v < vacancies; ++v) {
    if (bernoulli(churn_rng_, options_.enter_rate)) {
      const AgentId id = create_random(at);
      schedule(at, EventKind::AgentEnter, id);
    }
  }
  for (AgentId id = 1; id < agents_.size(); ++id) {
    if (agents_[id].live && bernoulli(churn_rng_, options_.leave_rate)) {
      schedule(at, EventKind::AgentLeave, id);
    }
  }
}

StepReport Market::step() {
  StepReport report;
  if (done_) {
    report.episode_over = true;
    return report;
  }
  while (!queue_.empty() && queue_.top().time >= next_trial_) {
    run_trials(next_trial_);
    next_trial_ += 1000;
  }
  const MarketEvent ev = queue_.top();
  queue_.pop();
  now_ = std::max(now_, ev.time);
  report.event = ev;

  switch (ev.kind) {
    case EventKind::AgentEnter: enter(ev.agent, now_); break;
    case EventKind::AgentLeave:
      if (agents_[ev.agent].live) {
        if (ev.agent == kFocal) {
          finish(false, std::nullopt, now_, report);
        } else {
          remove_agent(ev.agent, now_, CloseReason::SellerLeft, report);
        }
      }
      break;
    case EventKind::ActionDue: handle_action(ev, report); break;
  }
  report.episode_over = done_;
  return report;
}

EpisodeResult Market::run() {
  while (!done_) step();
  return result_;
}

void Market::record(StepReport& report, ThreadId id, Millis now, std::string_view actor,
                    ActionKind kind, std::optional<Price> offer) {
  if (!options_.trace || threads_[id].buyer != kFocal) return;
  TraceRow row;
  row.episode_id = options_.episode_id;
  row.thread_id = id;
  row.time_ms = now;
  row.actor = std::string(actor);
  row.kind = kind;
  row.offer = offer;
  row.stage_after = threads_[id].state.protocol.stage;
  report.trace.push_back(row);
  trace_.push_back(std::move(row));
}

void Market::handle_action(const MarketEvent& ev, StepReport& report) {
  if (!ev.thread) return;
  const ThreadId id = *ev.thread;
  Thread& th = threads_[id];
  if (th.state.protocol.is_terminal()) return;

  if (deadline_check(now_, th.t_end, th.state.protocol).is_terminal()) {
    const AgentId buyer = th.buyer;
    close_thread(id, now_, CloseReason::Deadline, report);
    if (buyer == kFocal) focal_.on_thread_closed(id, now_, CloseReason::Deadline, std::nullopt);
    return;
  }

  const Role role = agents_[ev.agent].role;
  const bool buyer_turn = th.state.protocol.turn == Turn::Buyer;
  if ((role == Role::Buyer) != buyer_turn) return;

  NegotiationAction act = role == Role::Buyer ? decide_buyer(id, now_) : decide_seller(id, now_);
  std::optional<Price> agreed;
  try {
    agreed = th.state.apply(act, role, now_);
  } catch (const IllegalAction&) {
    if (options_.strict) throw;
    ++illegal_masked_;
    act = NegotiationAction::make(ActionKind::Exit);
    agreed = th.state.apply(act, role, now_);
  }
  if (role == Role::Buyer && act.kind() == ActionKind::Offer) th.buyer_offers.push_back(*act.offer_value());
  record(report, id, now_, to_string(role), act.kind(), act.offer_value());

  const ProtocolState after = th.state.protocol;
  if (after.outcome == Outcome::Agreement && agreed) {
    settle(id, *agreed, now_, role == Role::Seller, report);
  } else if (after.is_terminal()) {
    const AgentId buyer = th.buyer;
    close_thread(id, now_, CloseReason::SellerExit, report);
    if (buyer == kFocal && role == Role::Seller) {
      focal_.on_thread_closed(id, now_, CloseReason::SellerExit, std::nullopt);
    }
  } else if (after.turn == Turn::Buyer) {
    schedule_buyer(id, now_);
  } else {
    schedule_seller(id, now_);
  }
}

void Market::close_thread(ThreadId id, Millis now, CloseReason /*reason*/, StepReport& report) {
  Thread& th = threads_[id];
  auto detach = [id](std::vector<ThreadId>& v) {
    auto it = std::find(v.begin(), v.end(), id);
    if (it != v.end()) v.erase(it);
  };
  if (!th.state.protocol.is_terminal()) {
    th.state.close_no_deal();
    record(report, id, now, "market", ActionKind::Exit, std::nullopt);
  }
  detach(agents_[th.buyer].threads);
  detach(agents_[th.seller].threads);
  ++topology_;
}

void Market::remove_agent(AgentId id, Millis now, CloseReason reason, StepReport& report) {
  Agent& a = agents_[id];
  if (!a.live) return;
  a.live = false;
  --live_count_;
  const auto threads = a.threads;
  for (ThreadId t : threads) {
    const bool focal_thread = threads_[t].buyer == kFocal;
    close_thread(t, now, reason, report);
    if (focal_thread && !done_) focal_.on_thread_closed(t, now, reason, std::nullopt);
  }
}

void Market::settle(ThreadId id, Price price, Millis now, bool by_seller, StepReport& report) {
  const AgentId buyer = threads_[id].buyer;
  const AgentId seller = threads_[id].seller;
  close_thread(id, now, CloseReason::SellerAccepted, report);
  if (buyer == kFocal) {
    if (by_seller) focal_.on_thread_closed(id, now, CloseReason::SellerAccepted, price);
    remove_agent(seller, now, CloseReason::SellerLeft, report);
    finish(true, price, now, report);
    return;
  }
  remove_agent(buyer, now, CloseReason::BuyerDone, report);
  remove_agent(seller, now, CloseReason::SellerLeft, report);
}

void Market::finish(bool success, std::optional<Price> price, Millis now, StepReport& report) {
  if (done_) return;
  result_.success = success;
  if (success) {
    result_.agreement_price = price;
    result_.duration_ms = now - agents_[kFocal].start;
    result_.utility = metric_utility(*price, agents_[kFocal].ip, agents_[kFocal].rp);
  }
  const CloseReason reason = success ? CloseReason::BuyerDone : CloseReason::Deadline;
  Agent& focal = agents_[kFocal];
  if (focal.live) {
    focal.live = false;
    --live_count_;
  }
  const auto threads = focal.threads;
  for (ThreadId t : threads) {
    close_thread(t, now, reason, report);
    focal_.on_thread_closed(t, now, reason, std::nullopt);
  }
  done_ = true;
  focal_.on_episode_end(result_);
}

ObservedState Market::observe(AgentId buyer, ThreadId thread) {
  if (thread >= threads_.size() || buyer >= agents_.size() || threads_[thread].buyer != buyer ||
      threads_[thread].state.protocol.is_terminal()) {
    throw UnknownThread(thread);
  }
  const Agent& b = agents_[buyer];
  const Thread& th = threads_[thread];
  ObservedState s;
  s.ns_r = static_cast<int>(b.threads.size());
  s.nc_r = competitor_count(buyer);
  s.s_neg = th.state.protocol.stage;
  s.x_best = th.state.x_best.value_or(b.ip);
  const Millis ref = th.state.last_seller_action_time.value_or(th.state.start_time);
  s.t_left = std::max<Millis>(0, b.t_end - ref);
  s.ip_b = b.ip;
  s.rp_b = b.rp;
  s.t_end = b.t_end - b.start;
  return s;
}

int Market::competitor_count(AgentId buyer) {
  Agent& b = agents_[buyer];
  if (b.nc_version == topology_) return b.nc_cached;
  ++stamp_gen_;
  int count = 0;
  stamp_[buyer] = stamp_gen_;
  for (ThreadId t : b.threads) {
    for (ThreadId u : agents_[threads_[t].seller].threads) {
      const AgentId other = threads_[u].buyer;
      if (stamp_[other] != stamp_gen_) {
        stamp_[other] = stamp_gen_;
        ++count;
      }
    }
  }
  b.nc_version = topology_;
  b.nc_cached = count;
  return count;
}

NegotiationAction Market::decide_buyer(ThreadId id, Millis now) {
  const Thread& th = threads_[id];
  const ObservedState s = observe(th.buyer, id);
  if (th.buyer != kFocal) return teacher_decide(s, th.state, options_.competitor_teacher);

  offers_scratch_.clear();
  for (ThreadId t : agents_[kFocal].threads) {
    if (const auto& o = threads_[t].state.last_seller_offer) offers_scratch_.push_back(*o);
  }
  DecisionPoint p;
  p.thread = id;
  p.now = now;
  p.state = s;
  p.thread_state = &th.state;
  p.legal = legal_actions(th.state.protocol, Role::Buyer);
  p.seller_offers = offers_scratch_;
  return focal_.decide(p);
}

NegotiationAction Market::decide_seller(ThreadId id, Millis now) {
  const Thread& th = threads_[id];
  const Agent& s = agents_[th.seller];
  SellerView v;
  v.protocol = th.state.protocol;
  v.buyer_offers = th.buyer_offers;
  v.last_own_offer = th.state.last_seller_offer;
  v.elapsed = now - th.state.start_time;
  v.horizon = std::max<Millis>(1, th.t_end - th.state.start_time);
  v.ip_s = s.ip;
  v.rp_s = s.rp;
  return seller_decide(s.tactic, v, seller_rng_);
}

int Market::live_buyers() const {
  int n = 0;
  for (const auto& a : agents_) n += (a.live && a.role == Role::Buyer) ? 1 : 0;
  return n;
}

int Market::live_sellers() const {
  int n = 0;
  for (const auto& a : agents_) n += (a.live && a.role == Role::Seller) ? 1 : 0;
  return n;
}

std::vector<ThreadId> Market::open_threads(AgentId agent) const { return agents_.at(agent).threads; }

const NegotiationThreadState& Market::thread_state(ThreadId thread) const {
  if (thread >= threads_.size()) throw UnknownThread(thread);
  return threads_[thread].state;
}

bool Market::is_buyer(AgentId agent) const { return agents_.at(agent).role == Role::Buyer; }

}  // namespace negsim

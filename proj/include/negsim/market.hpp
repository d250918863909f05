#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <stdexcept>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "negsim/features.hpp"
#include "negsim/metrics.hpp"
#include "negsim/protocol.hpp"
#include "negsim/strategies.hpp"
#include "negsim/types.hpp"

namespace negsim {

enum class Level : std::uint8_t { H, A, L };
enum class Zoa : std::uint8_t { H100, A60, L10 };
enum class DeadlineClass : std::uint8_t { Lg, A, Sh };

const char* to_string(Level v);
const char* to_string(Zoa v);
const char* to_string(DeadlineClass v);
std::optional<Level> parse_level(std::string_view text);
std::optional<Zoa> parse_zoa(std::string_view text);
std::optional<DeadlineClass> parse_deadline(std::string_view text);

inline constexpr Level kAllLevels[] = {Level::H, Level::A, Level::L};
inline constexpr Zoa kAllZoas[] = {Zoa::H100, Zoa::A60, Zoa::L10};
inline constexpr DeadlineClass kAllDeadlines[] = {DeadlineClass::Lg, DeadlineClass::A,
                                                  DeadlineClass::Sh};

// Qualitative market knobs; 3 x 3 x 3 x 3 = 81 settings.
struct MarketConfig {
  Level md = Level::L;
  Level mr = Level::H;
  Zoa zoa = Zoa::A60;
  DeadlineClass deadline_class = DeadlineClass::Lg;
  std::uint64_t seed = 1;
};

std::vector<MarketConfig> all_market_settings(std::uint64_t seed);

struct PriceRange {
  Price lo = 0;
  Price hi = 0;
};

struct SellerPriceRanges {
  PriceRange ip;
  PriceRange rp;
};

SellerPriceRanges seller_price_ranges(Zoa zoa);
PriceRange deadline_range_ms(DeadlineClass d);
std::array<int, 3> density_values(Level md);
// Buyer:seller ratio triplets.
std::array<std::pair<int, int>, 3> ratio_values(Level mr);

inline constexpr PriceRange kBuyerIpRange{300, 350};
inline constexpr PriceRange kBuyerRpRange{500, 550};

struct SampledMarket {
  int max_agents = 0;
  int ratio_buyers = 1;
  int ratio_sellers = 1;
  Price ip_b = 0;
  Price rp_b = 0;
  Millis t_end = 0;
  Millis turn_latency = 500;
  Zoa zoa = Zoa::A60;
  DeadlineClass deadline_class = DeadlineClass::Lg;
};

SampledMarket sample_market(const MarketConfig& config, Rng& rng);

struct MarketOptions {
  Millis latency_base = 500;
  Millis latency_jitter = 250;
  double enter_rate = 0.2;     // per vacancy per simulated second
  double leave_rate = 0.005;   // per live agent per simulated second
  bool strict = false;         // abort on IllegalAction instead of masking it
  bool trace = false;
  std::uint64_t episode_id = 0;
  TeacherParams competitor_teacher{};
};

// What the focal buyer's strategy sees when asked to act on one thread.
struct DecisionPoint {
  ThreadId thread = 0;
  Millis now = 0;
  ObservedState state;
  const NegotiationThreadState* thread_state = nullptr;
  ActionSet legal;
  // Most recent offer of every seller the buyer is negotiating with.
  std::span<const Price> seller_offers;
};

// Why a focal thread closed without the focal buyer's own terminal action.
enum class CloseReason : std::uint8_t {
  SellerAccepted,  // agreement at the buyer's standing offer
  SellerExit,
  SellerLeft,      // departed or sold to a competitor
  Deadline,
  BuyerDone,       // the focal buyer agreed on another thread
};

class BuyerPolicy {
 public:
  virtual ~BuyerPolicy() = default;
  virtual NegotiationAction decide(const DecisionPoint& point) = 0;
  virtual void on_thread_closed(ThreadId /*thread*/, Millis /*now*/, CloseReason /*reason*/,
                                std::optional<Price> /*agreement*/) {}
  virtual void on_episode_end(const EpisodeResult& /*result*/) {}
};

class UnknownThread : public std::out_of_range {
 public:
  explicit UnknownThread(ThreadId id)
      : std::out_of_range("unknown thread " + std::to_string(id)) {}
};

// The teacher heuristic as a focal-buyer policy.
class TeacherPolicy final : public BuyerPolicy {
 public:
  explicit TeacherPolicy(TeacherParams params = {}) : params_(params) {}
  NegotiationAction decide(const DecisionPoint& point) override;

 private:
  TeacherParams params_;
};

enum class EventKind : std::uint8_t { AgentEnter, AgentLeave, ActionDue };

struct MarketEvent {
  Millis time = 0;
  EventKind kind = EventKind::ActionDue;
  AgentId agent = 0;
  std::optional<ThreadId> thread;
  std::uint64_t seq = 0;
};

// Processing order: time, then (agent, thread), then kind, then insertion.
bool event_after(const MarketEvent& a, const MarketEvent& b);

struct StepReport {
  MarketEvent event;
  std::vector<TraceRow> trace;  // focal-thread transitions caused by this event
  bool episode_over = false;
};

// One episode: a focal buyer (agent 0) negotiating concurrently with every
// live seller, among competitor buyers running the teacher heuristic.
class Market {
 public:
  Market(const MarketConfig& config, SellerStrategyId sellers, BuyerPolicy& focal,
         MarketOptions options = {});

  const SampledMarket& sampled() const noexcept { return sampled_; }
  Millis now() const noexcept { return now_; }
  bool done() const noexcept { return done_; }

  // Processes the earliest pending event.
  StepReport step();
  EpisodeResult run();

  // Throws std::out_of_range (UnknownThread) for threads that do not exist or
  // do not belong to `buyer`.
  ObservedState observe(AgentId buyer, ThreadId thread);

  static constexpr AgentId kFocal = 0;

  // Introspection for tests and invariants.
  int live_agents() const noexcept { return live_count_; }
  int live_buyers() const;
  int live_sellers() const;
  std::vector<ThreadId> open_threads(AgentId agent) const;
  const NegotiationThreadState& thread_state(ThreadId thread) const;
  bool is_buyer(AgentId agent) const;
  std::uint64_t illegal_masked() const noexcept { return illegal_masked_; }
  // Focal-thread transitions so far (only when MarketOptions::trace is set).
  const std::vector<TraceRow>& trace() const noexcept { return trace_; }

  // Schedules an extra event (tests use this to inject departures).
  void schedule(Millis time, EventKind kind, AgentId agent, std::optional<ThreadId> thread = {});
  // Inserts a seller on demand; returns its id.
  AgentId spawn_seller(Price ip_s, Price rp_s, SellerTactic tactic);

 private:
  struct Agent {
    Role role = Role::Buyer;
    bool live = false;
    bool pending = false;  // entry scheduled, not yet processed
    Price ip = 0;
    Price rp = 0;
    Millis start = 0;
    Millis t_end = 0;
    Millis free_at = 0;  // sellers serialize their actions across threads
    SellerTactic tactic;
    std::vector<ThreadId> threads;
    // Cached NC_r for buyers, valid while topology_ is unchanged.
    std::uint64_t nc_version = ~0ull;
    int nc_cached = 0;
  };

  struct Thread {
    AgentId buyer = 0;
    AgentId seller = 0;
    Millis t_end = 0;
    NegotiationThreadState state;
    std::vector<Price> buyer_offers;
  };

  struct EventOrder {
    bool operator()(const MarketEvent& a, const MarketEvent& b) const { return event_after(a, b); }
  };

  AgentId create_buyer(Price ip, Price rp, Millis start, Millis t_b);
  AgentId create_seller(Price ip, Price rp, SellerTactic tactic);
  AgentId create_random(Millis start);
  void enter(AgentId id, Millis now);
  void open_thread(AgentId buyer, AgentId seller, Millis now);
  // Detaches a thread from both agents, forcing S5/NoDeal if still open.
  void close_thread(ThreadId id, Millis now, CloseReason reason, StepReport& report);
  void remove_agent(AgentId id, Millis now, CloseReason reason, StepReport& report);
  void settle(ThreadId id, Price price, Millis now, bool by_seller, StepReport& report);
  void run_trials(Millis at);
  Millis latency();
  void schedule_buyer(ThreadId id, Millis after);
  void schedule_seller(ThreadId id, Millis after);
  void handle_action(const MarketEvent& ev, StepReport& report);
  NegotiationAction decide_buyer(ThreadId id, Millis now);
  NegotiationAction decide_seller(ThreadId id, Millis now);
  int competitor_count(AgentId buyer);
  void record(StepReport& report, ThreadId id, Millis now, std::string_view actor,
              ActionKind kind, std::optional<Price> offer);
  void finish(bool success, std::optional<Price> price, Millis now, StepReport& report);

  MarketConfig config_;
  SellerStrategyId seller_id_;
  BuyerPolicy& focal_;
  MarketOptions options_;
  SampledMarket sampled_;

  Rng sample_rng_;   // agent parameters
  Rng churn_rng_;    // entry/exit trials
  Rng latency_rng_;
  Rng seller_rng_;   // stochastic seller tactics

  std::vector<Agent> agents_;
  std::vector<Thread> threads_;
  std::priority_queue<MarketEvent, std::vector<MarketEvent>, EventOrder> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t topology_ = 0;
  Millis now_ = 0;
  Millis next_trial_ = 1000;
  int live_count_ = 0;
  bool done_ = false;
  std::uint64_t illegal_masked_ = 0;
  EpisodeResult result_;
  std::vector<Price> offers_scratch_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t stamp_gen_ = 0;
  std::vector<TraceRow> trace_;
};

}  // namespace negsim

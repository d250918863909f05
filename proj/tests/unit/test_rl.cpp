#include <doctest.h>

#include <cmath>
#include <set>

#include "negsim/experiment.hpp"
#include "negsim/rl.hpp"

using namespace negsim;

namespace {

Experience synthetic(Rng& rng, bool terminal) {
  Experience e;
  for (auto& v : e.s) v = uniform(rng, 0, 1);
  for (auto& v : e.s_next) v = uniform(rng, 0, 1);
  const auto k = static_cast<PolicyAction>(rng() % kPolicyActions);
  e.a = encode_action(k, k == PolicyAction::CounterOffer ? uniform(rng, 0, 1) : 0.0);
  e.r = uniform(rng, -1, 1);
  e.terminal = terminal;
  return e;
}

// Terminal transition whose reward is a smooth function of state and action,
// so a small critic can actually fit it.
Experience smooth_terminal(Rng& rng) {
  Experience e;
  for (auto& v : e.s) v = uniform(rng, 0, 1);
  e.s_next = e.s;
  const auto k = static_cast<PolicyAction>(rng() % kPolicyActions);
  const double u = k == PolicyAction::CounterOffer ? uniform(rng, 0, 1) : 0.0;
  e.a = encode_action(k, u);
  e.r = 0.6 * (e.s[0] - e.s[7]) + 0.4 * u - 0.3 * (k == PolicyAction::Exit);
  e.terminal = true;
  return e;
}

std::vector<double> flat(const Mlp& m) { return {m.params().begin(), m.params().end()}; }

std::vector<double> flat(const PolicyNetwork& p) {
  std::vector<double> out;
  for (const auto* b : p.blocks()) out.insert(out.end(), b->params().begin(), b->params().end());
  return out;
}

ObservedState s1_state() {
  ObservedState s;
  s.ns_r = 4;
  s.s_neg = Stage::S1;
  s.x_best = 320;
  s.t_left = 50000;
  s.ip_b = 320;
  s.rp_b = 520;
  s.t_end = 100000;
  return s;
}

}  // namespace

TEST_CASE("action encoding") {
  const auto a = encode_action(PolicyAction::CounterOffer, 0.25);
  CHECK(a[0] == 1.0);
  CHECK(a[kPolicyActions] == 0.25);
  const auto b = encode_action(PolicyAction::Exit, 0.7);
  CHECK(b[4] == 1.0);
  CHECK(b[kPolicyActions] == 0.0);
}

TEST_CASE("replay buffer capacity and sampling") {
  ReplayBuffer buf(10);
  Rng rng(1);
  for (int i = 0; i < 25; ++i) {
    Experience e;
    e.r = i;
    buf.push(e);
    CHECK(buf.size() <= 10);
  }
  CHECK(buf.size() == 10);
  std::set<double> held;
  for (std::size_t i = 0; i < buf.size(); ++i) held.insert(buf.at(i).r);
  CHECK(*held.begin() == 15);
  Rng a(3), b(3);
  const auto x = buf.sample(6, a);
  const auto y = buf.sample(6, b);
  std::set<double> distinct;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].r == y[i].r);
    distinct.insert(x[i].r);
  }
  CHECK(distinct.size() == 6);
  CHECK_THROWS(buf.sample(11, a));
}

TEST_CASE("config validation") {
  DdpgConfig c;
  CHECK(c.validate().empty());
  c.capacity = 100;
  c.batch = 100;
  const auto errs = c.validate();
  REQUIRE_FALSE(errs.empty());
  CHECK(errs.front() == "K must be < N");
  c.batch = 10;
  c.tau = 0;
  CHECK_FALSE(c.validate().empty());
  c.tau = 1;
  c.gamma = 1.5;
  CHECK_FALSE(c.validate().empty());
}

TEST_CASE("masked greedy tie-break follows the canonical kind order") {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(kPolicyActions);
  CHECK(masked_greedy(z, {true, false, false, false, true}) == PolicyAction::CounterOffer);
  CHECK(masked_greedy(z, {false, true, false, true, true}) == PolicyAction::ReqToReserve);
  CHECK(masked_greedy(z, {false, true, true, false, true}) == PolicyAction::Confirm);
  CHECK(masked_greedy(z, {false, true, false, false, true}) == PolicyAction::Accept);
  z(4) = 5;
  CHECK(masked_greedy(z, {true, false, false, false, true}) == PolicyAction::Exit);
  CHECK(masked_greedy(z, {true, false, false, false, false}) == PolicyAction::CounterOffer);
}

TEST_CASE("action selection") {
  Rng rng(2);
  PolicyNetwork actor(PolicyArchitecture{}, rng);
  for (auto* b : actor.blocks()) std::fill(b->params().begin(), b->params().end(), 0.0);
  DdpgConfig cfg;
  ActorCritic ac(actor, cfg, rng);
  const ActionSet legal{ActionKind::Offer, ActionKind::Exit};
  Rng r(5);
  const auto a = ac.select_action(s1_state(), legal, Exploration::Exploit, r);
  REQUIRE(a.kind() == ActionKind::Offer);
  CHECK(*a.offer_value() == doctest::Approx(420));

  Rng init(3);
  ActorCritic trained(PolicyNetwork(PolicyArchitecture{}, init), cfg, init);
  Rng r1(1), r2(2);
  CHECK(trained.select_action(s1_state(), legal, Exploration::Exploit, r1) ==
        trained.select_action(s1_state(), legal, Exploration::Exploit, r2));
  trained.config().noise_scale = 0;
  CHECK(trained.select_action(s1_state(), legal, Exploration::Explore, r1) ==
        trained.select_action(s1_state(), legal, Exploration::Exploit, r2));
  trained.config().noise_scale = 5;
  for (int i = 0; i < 100; ++i) {
    const auto n = trained.select_action(s1_state(), legal, Exploration::Explore, r1);
    if (n.offer_value()) {
      CHECK(*n.offer_value() >= 320);
      CHECK(*n.offer_value() <= 520);
    }
  }
}

TEST_CASE("soft update contraction") {
  Rng rng(4);
  DdpgConfig cfg;
  ActorCritic ac(PolicyNetwork(PolicyArchitecture{}, rng), cfg, rng);
  std::vector<Experience> batch;
  for (int i = 0; i < 16; ++i) batch.push_back(synthetic(rng, false));
  ac.update(batch);  // online and target now differ
  for (double tau : {0.005, 0.3, 1.0}) {
    const auto online_c = flat(ac.critic());
    const auto target_c = flat(ac.target_critic());
    const auto online_a = flat(ac.actor());
    const auto target_a = flat(ac.target_actor());
    ac.soft_update(tau);
    const auto new_c = flat(ac.target_critic());
    const auto new_a = flat(ac.target_actor());
    for (std::size_t i = 0; i < new_c.size(); ++i) {
      CHECK(std::abs((new_c[i] - online_c[i]) - (1 - tau) * (target_c[i] - online_c[i])) <= 1e-12);
    }
    for (std::size_t i = 0; i < new_a.size(); ++i) {
      CHECK(std::abs((new_a[i] - online_a[i]) - (1 - tau) * (target_a[i] - online_a[i])) <= 1e-12);
    }
  }
  CHECK(flat(ac.target_critic()) == flat(ac.critic()));
}

TEST_CASE("tau = 1 makes targets equal online networks after an update") {
  Rng rng(5);
  DdpgConfig cfg;
  cfg.tau = 1.0;
  ActorCritic ac(PolicyNetwork(PolicyArchitecture{}, rng), cfg, rng);
  std::vector<Experience> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(synthetic(rng, i % 2 == 0));
  ac.update(batch);
  CHECK(flat(ac.target_critic()) == flat(ac.critic()));
  CHECK(flat(ac.target_actor()) == flat(ac.actor()));
}

TEST_CASE("critic target is the reward with gamma 0 on terminal batches") {
  Rng rng(6);
  DdpgConfig cfg;
  cfg.gamma = 0;
  cfg.critic_lr = 1e-2;
  ActorCritic ac(PolicyNetwork(PolicyArchitecture{}, rng), cfg, rng);
  std::vector<Experience> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(synthetic(rng, true));
  const Matrix q0 = ac.q_values(batch, false);
  double expected = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) expected += std::pow(q0(0, static_cast<Eigen::Index>(i)) - batch[i].r, 2);
  expected /= static_cast<double>(batch.size());
  const auto stats = ac.update(batch);
  CHECK(stats.critic_loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(ac.update(std::vector<Experience>{}), EmptyBatch);
}

TEST_CASE("critic loss on a fixed batch drops tenfold within 200 updates") {
  Rng rng(7);
  DdpgConfig cfg;
  ActorCritic ac(PolicyNetwork(PolicyArchitecture{}, rng), cfg, rng);
  std::vector<Experience> batch;
  for (int i = 0; i < 64; ++i) batch.push_back(smooth_terminal(rng));
  const double first = ac.update(batch).critic_loss;
  double last = first;
  for (int i = 1; i < 200; ++i) last = ac.update(batch).critic_loss;
  CHECK(last * 10 <= first);
}

TEST_CASE("critic gradient check") {
  Rng rng(8);
  Mlp critic = make_critic({64, 64});
  critic.init(rng);
  const Matrix x = Matrix::Random(kFeatureDim + kActionDim, 10);
  const Matrix y = Matrix::Random(1, 10);
  CHECK(gradient_check(critic, x, y, rng, 300) <= 1e-4);
}

TEST_CASE("actor-critic checkpoints round-trip") {
  Rng rng(9);
  DdpgConfig cfg;
  ActorCritic ac(PolicyNetwork(PolicyArchitecture{}, rng), cfg, rng);
  std::vector<Experience> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(synthetic(rng, false));
  ac.update(batch);
  const auto path = std::filesystem::temp_directory_path() / "negsim_ac_test.txt";
  ac.save(path);
  const auto back = ActorCritic::load(path, cfg);
  CHECK(back->actor() == ac.actor());
  CHECK(back->critic() == ac.critic());
  CHECK(back->target_actor() == ac.target_actor());
  CHECK(back->target_critic() == ac.target_critic());
  std::filesystem::remove(path);
}

TEST_CASE("learning buyer rewards stay bounded and the greedy episode is deterministic") {
  Rng rng(10);
  DdpgConfig cfg;
  cfg.batch = 16;
  cfg.capacity = 1000;
  ActorCritic ac(PolicyNetwork(PolicyArchitecture{}, rng), cfg, rng);
  ReplayBuffer buf(cfg.capacity);
  const auto scenarios = favourable_scenarios({SellerStrategyId::Conceder});
  const auto log = train_actor_critic(ac, buf, scenarios, 2, 3);
  CHECK(log.size() == 2);
  CHECK(buf.size() >= log.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    CHECK(buf.at(i).r >= -1.0);
    CHECK(buf.at(i).r <= 1.0);
    for (double v : buf.at(i).a) CHECK(std::isfinite(v));
  }
  const auto a = evaluate_actor(ac, scenarios, 3, 5);
  const auto b = evaluate_actor(ac, scenarios, 3, 5);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(format_result_row(a[i]) == format_result_row(b[i]));
}

TEST_CASE("training log format") {
  CHECK(format_training_row({3, 1, 0.5, 0.25, -1, 0.1}) == "3,1,0.5,0.25,-1,0.1");
}

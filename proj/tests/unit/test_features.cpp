#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "negsim/dataset.hpp"
#include "negsim/features.hpp"

using namespace negsim;

namespace {

ObservedState sample_state() {
  ObservedState s;
  s.ns_r = 5;
  s.nc_r = 3;
  s.s_neg = Stage::S2;
  s.x_best = 300;
  s.t_left = 90000;
  s.ip_b = 320;
  s.rp_b = 520;
  s.t_end = 90000;
  return s;
}

// Brute-force two-pass Pearson coefficient.
double pearson(const std::vector<std::vector<double>>& rows, std::size_t a, std::size_t b) {
  double ma = 0, mb = 0;
  for (const auto& r : rows) {
    ma += r[a];
    mb += r[b];
  }
  ma /= static_cast<double>(rows.size());
  mb /= static_cast<double>(rows.size());
  double sab = 0, saa = 0, sbb = 0;
  for (const auto& r : rows) {
    sab += (r[a] - ma) * (r[b] - mb);
    saa += (r[a] - ma) * (r[a] - ma);
    sbb += (r[b] - mb) * (r[b] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("encoding examples") {
  const auto f = encode(sample_state());
  CHECK(f[7] == 1.0);
  CHECK(f[2] == 0.0);
  CHECK(f[3] == 1.0);
  CHECK(f[4] == 0.0);
  CHECK(f[5] == 0.0);
  CHECK(f[6] == 0.0);
  CHECK(f[0] == doctest::Approx(5.0 / 50));
  CHECK(f[1] == doctest::Approx(3.0 / 50));
  CHECK(f[8] == doctest::Approx(20.0 / 430));
  CHECK(f[9] == doctest::Approx(220.0 / 430));
  CHECK(denormalize_price(normalize_price(417.25)) == doctest::Approx(417.25));
}

TEST_CASE("encoding separates stages and is monotone") {
  auto s = sample_state();
  std::set<FeatureVector> seen;
  for (auto st : {Stage::S1, Stage::S2, Stage::S3, Stage::S4, Stage::S5}) {
    s.s_neg = st;
    seen.insert(encode(s));
  }
  CHECK(seen.size() == 5);
  s = sample_state();
  auto base = encode(s);
  s.t_left -= 1000;
  CHECK(encode(s)[7] < base[7]);
  s = sample_state();
  s.x_best += 1;
  CHECK(encode(s)[6] > base[6]);
  s = sample_state();
  s.ns_r += 1;
  s.nc_r += 1;
  CHECK(encode(s)[0] > base[0]);
  CHECK(encode(s)[1] > base[1]);
}

TEST_CASE("policy action mapping and legal masks") {
  for (std::size_t i = 0; i < kPolicyActions; ++i) {
    const auto a = static_cast<PolicyAction>(i);
    CHECK(*to_policy_action(to_action_kind(a)) == a);
    CHECK(*parse_policy_action(to_string(a)) == a);
  }
  CHECK_FALSE(to_policy_action(ActionKind::Reserve));
  CHECK_FALSE(to_policy_action(ActionKind::Cancel));
  const auto s1 = legal_policy_mask(ProtocolState::initial());
  CHECK(s1 == std::array<bool, kPolicyActions>{true, false, false, false, true});
  const auto s4 = legal_policy_mask(ProtocolState{Stage::S4, Turn::Buyer, Outcome::Open});
  CHECK(s4 == std::array<bool, kPolicyActions>{false, false, true, false, true});
  auto st = sample_state();
  st.s_neg = Stage::S2;
  CHECK(legal_policy_mask(encode(st)) ==
        legal_policy_mask(ProtocolState{Stage::S2, Turn::Buyer, Outcome::Open}));
}

TEST_CASE("pearson matrix matches brute force") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 1);
  std::vector<std::vector<double>> rows(100, std::vector<double>(9));
  for (auto& r : rows) {
    for (auto& v : r) v = n(rng);
    r[1] = 0.5 * r[0] + n(rng);
  }
  const auto rep = pearson_matrix(rows);
  for (std::size_t a = 0; a < 9; ++a) {
    CHECK(rep.matrix[a][a] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t b = 0; b < 9; ++b) {
      CHECK(std::abs(rep.matrix[a][b] - rep.matrix[b][a]) < 1e-15);
      if (a != b) CHECK(std::abs(rep.matrix[a][b] - pearson(rows, a, b)) < 1e-12);
    }
  }
}

TEST_CASE("pearson conventions") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 20; ++i) rows.push_back({double(i), 3.0 * i + 2.0, 7.0});
  const auto rep = pearson_matrix(rows, {"a", "b", "c"});
  CHECK(rep.matrix[0][1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.degenerate[2]);
  CHECK(rep.matrix[0][2] == 0.0);
  CHECK(rep.matrix[2][2] == 1.0);
  CHECK(rep.max_off_diagonal() == doctest::Approx(1.0));
  CHECK_THROWS(pearson_matrix(std::vector<std::vector<double>>{{1.0, 2.0}}));
}

TEST_CASE("dataset generation is deterministic and labels respect the bounds") {
  DatasetSpec spec = default_dataset_spec(3);
  spec.episodes = 6;
  const Dataset a = generate_dataset(spec);
  const Dataset b = generate_dataset(spec);
  REQUIRE(a.size() == b.size());
  REQUIRE_FALSE(a.empty());
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].features == b[i].features && a[i].label_action == b[i].label_action &&
           a[i].label_offer == b[i].label_offer;
    CHECK(a[i].label_offer.has_value() == (a[i].label_action == PolicyAction::CounterOffer));
    if (a[i].label_offer) {
      CHECK(*a[i].label_offer >= a[i].ip_b - 1e-9);
      CHECK(*a[i].label_offer <= a[i].rp_b + 1e-9);
    }
  }
  CHECK(same);
  spec.seed = 4;
  const Dataset c = generate_dataset(spec);
  CHECK((c.size() != a.size() || c.front().features != a.front().features));
}

TEST_CASE("dataset rows equal traced buyer decisions") {
  DatasetSpec spec = default_dataset_spec(8);
  spec.episodes = 4;
  const Dataset rows = generate_dataset(spec);
  std::size_t decisions = 0;
  for (std::uint64_t e = 0; e < spec.episodes; ++e) {
    const Scenario& sc = spec.scenarios[e % spec.scenarios.size()];
    MarketConfig cfg = sc.market;
    cfg.seed = episode_seed(spec.seed, e);
    TeacherPolicy teacher(spec.teacher);
    MarketOptions opt;
    opt.trace = true;
    Market m(cfg, sc.seller, teacher, opt);
    m.run();
    for (const auto& t : m.trace()) decisions += t.actor == "buyer" ? 1 : 0;
  }
  CHECK(rows.size() == decisions);
}

TEST_CASE("dataset csv round trip") {
  DatasetSpec spec = default_dataset_spec(2);
  spec.episodes = 2;
  const Dataset a = generate_dataset(spec);
  const auto path = std::filesystem::temp_directory_path() / "negsim_dataset_test.csv";
  write_dataset_csv(a, path);
  const Dataset b = read_dataset_csv(path);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].features == b[i].features);
    CHECK(a[i].label_action == b[i].label_action);
    CHECK(a[i].label_offer == b[i].label_offer);
  }
  std::filesystem::remove(path);
}

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "negsim/experiment.hpp"

using namespace negsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("negsim_exp_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

ExperimentSpec tiny(RunMode mode, const fs::path& out) {
  ExperimentSpec s;
  s.mode = mode;
  s.out = out;
  s.scale = 100;
  s.sl.epochs = 1;
  s.rl.batch = 16;
  s.rl.capacity = 5000;
  return s;
}

}  // namespace

TEST_CASE("run mode names") {
  for (auto m : {RunMode::GenData, RunMode::TrainSl, RunMode::TrainRl, RunMode::Evaluate,
                 RunMode::HypothesisA, RunMode::HypothesisB, RunMode::HypothesisC}) {
    CHECK(*parse_run_mode(to_string(m)) == m);
  }
  CHECK_FALSE(parse_run_mode("sweep"));
}

TEST_CASE("spec validation") {
  ExperimentSpec s;
  CHECK(validate_spec(s).empty());

  s.rl.batch = 100;
  s.rl.capacity = 100;
  auto errs = validate_spec(s);
  CHECK(std::find(errs.begin(), errs.end(), "K must be < N") != errs.end());

  s = ExperimentSpec{};
  s.sellers = {"conceder,hardliner"};
  errs = validate_spec(s);
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].find("hardliner") != std::string::npos);
  CHECK(errs[0].find("rel_tft") != std::string::npos);

  s = ExperimentSpec{};
  s.episodes = 0;
  CHECK_FALSE(validate_spec(s).empty());

  s = ExperimentSpec{};
  s.sl.validation_fraction = 1.5;
  CHECK_FALSE(validate_spec(s).empty());

  s = ExperimentSpec{};
  s.mode = RunMode::TrainRl;
  s.sl_checkpoint = "/nonexistent/sl.txt";
  CHECK_FALSE(validate_spec(s).empty());

  s = ExperimentSpec{};
  s.zoa = "60,7";
  CHECK_FALSE(validate_spec(s).empty());
  s.zoa = "all";
  CHECK(validate_spec(s).empty());

  s = ExperimentSpec{};
  s.mode = RunMode::HypothesisC;
  s.sellers = {"conceder"};
  CHECK_FALSE(validate_spec(s).empty());
}

TEST_CASE("evaluate with zero episodes is rejected") {
  auto s = tiny(RunMode::Evaluate, scratch("zero"));
  s.episodes = 0;
  std::ostringstream log;
  CHECK_THROWS_AS(run_experiment(s, log), std::invalid_argument);
}

TEST_CASE("config files") {
  const auto path = fs::temp_directory_path() / "negsim_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"mode":"hypothesis-b","seed":9,"seller":["conceder"],"zoa":"60",
              "sl":{"epochs":3,"dropout":0.1},"rl":{"batch":32,"discount":"inverted"}})";
  }
  ExperimentSpec s;
  apply_config_file(s, path);
  CHECK(s.mode == RunMode::HypothesisB);
  CHECK(s.seed == 9);
  CHECK(s.sellers == std::vector<std::string>{"conceder"});
  CHECK(*s.zoa == "60");
  CHECK(s.sl.epochs == 3);
  CHECK(s.sl.dropout_rate == 0.1);
  CHECK(s.rl.batch == 32);
  CHECK(s.rl.reward.variant == DiscountVariant::Inverted);
  {
    std::ofstream out(path);
    out << R"({"mode":"evaluate","bogus":1})";
  }
  CHECK_THROWS_AS(apply_config_file(s, path), std::invalid_argument);
  fs::remove(path);
}

TEST_CASE("hypothesis-a writes one summary row per setting and seller family") {
  auto s = tiny(RunMode::HypothesisA, scratch("hyp_a"));
  s.episodes = 1;
  std::ostringstream log;
  run_experiment(s, log);
  CHECK(lines(s.out / "summary.csv") == 1 + 2 * 81);
  CHECK(fs::exists(s.out / "plot_success_by_md_zoa.csv"));
  CHECK(lines(s.out / "plot_success_by_md_zoa.csv") == 1 + 2 * 9);
  CHECK(fs::exists(s.out / "manifest.json"));
  fs::remove_all(s.out);
}

TEST_CASE("reruns are byte-identical") {
  for (auto mode : {RunMode::GenData, RunMode::TrainSl, RunMode::TrainRl, RunMode::Evaluate}) {
    CAPTURE(to_string(mode));
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    auto s = tiny(mode, a);
    s.scale = 250;
    std::ostringstream log;
    run_experiment(s, log);
    s.out = b;
    run_experiment(s, log);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      const auto name = entry.path().filename();
      CHECK(slurp(a / name) == slurp(b / name));
      ++files;
    }
    CHECK(files >= 2);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_CASE("train-rl from a supervised checkpoint, then evaluate it") {
  const auto sl_dir = scratch("sl");
  auto s = tiny(RunMode::TrainSl, sl_dir);
  s.scale = 250;
  std::ostringstream log;
  run_experiment(s, log);
  REQUIRE(fs::exists(sl_dir / "sl_policy.txt"));
  CHECK(lines(sl_dir / "sl_history.csv") == 2);

  const auto rl_dir = scratch("rl");
  s = tiny(RunMode::TrainRl, rl_dir);
  s.scale = 250;
  s.sl_checkpoint = sl_dir / "sl_policy.txt";
  run_experiment(s, log);
  REQUIRE(fs::exists(rl_dir / "actor_critic.txt"));
  CHECK(lines(rl_dir / "training_log.csv") == 3);

  const auto ev_dir = scratch("ev");
  s = tiny(RunMode::Evaluate, ev_dir);
  s.episodes = 3;
  s.rl_checkpoint = rl_dir / "actor_critic.txt";
  run_experiment(s, log);
  // 2 sellers x 2 favourable settings.
  CHECK(lines(ev_dir / "summary.csv") == 5);
  CHECK(lines(ev_dir / "results.csv") == 1 + 4 * 3);
  for (const auto& d : {sl_dir, rl_dir, ev_dir}) fs::remove_all(d);
}

TEST_CASE("hypothesis-b and -c smoke runs") {
  for (auto mode : {RunMode::HypothesisB, RunMode::HypothesisC}) {
    const auto dir = scratch("hyp");
    auto s = tiny(mode, dir);
    s.scale = 250;
    std::ostringstream log;
    run_experiment(s, log);
    const std::size_t strategies = mode == RunMode::HypothesisB ? 4 : 3;
    CHECK(lines(dir / "summary.csv") == 1 + 2 * strategies);
    fs::remove_all(dir);
  }
}

TEST_CASE("unwritable output directory fails") {
  auto s = tiny(RunMode::GenData, "/proc/negsim_cannot_write_here");
  std::ostringstream log;
  CHECK_THROWS(run_experiment(s, log));
}

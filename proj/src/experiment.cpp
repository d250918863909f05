#include "negsim/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <sstream>

#include "negsim/csv.hpp"

namespace negsim {

std::vector<EpisodeResult> run_campaign(BuyerPolicy& policy, const std::vector<Scenario>& scenarios,
                                        std::uint64_t episodes, std::uint64_t seed,
                                        MarketOptions options) {
  if (scenarios.empty()) throw std::invalid_argument("campaign has no scenarios");
  std::vector<EpisodeResult> out;
  out.reserve(episodes);
  for (std::uint64_t e = 0; e < episodes; ++e) {
    const Scenario& sc = scenarios[e % scenarios.size()];
    MarketConfig cfg = sc.market;
    cfg.seed = episode_seed(seed, e);
    options.episode_id = e;
    Market market(cfg, sc.seller, policy, options);
    out.push_back(market.run());
  }
  return out;
}

std::vector<TrainingLogRow> train_actor_critic(ActorCritic& ac, ReplayBuffer& buffer,
                                               const std::vector<Scenario>& scenarios,
                                               std::uint64_t episodes, std::uint64_t seed,
                                               bool mask_illegal,
                                               std::vector<EpisodeResult>* results) {
  if (scenarios.empty()) throw std::invalid_argument("training has no scenarios");
  LearningBuyer buyer(ac, &buffer, {true, Exploration::Explore, mask_illegal, seed});
  std::vector<TrainingLogRow> log;
  log.reserve(episodes);
  for (std::uint64_t e = 0; e < episodes; ++e) {
    const Scenario& sc = scenarios[e % scenarios.size()];
    MarketConfig cfg = sc.market;
    cfg.seed = episode_seed(seed, e);
    MarketOptions options;
    options.episode_id = e;
    options.strict = !mask_illegal;
    buyer.begin_episode(e);
    Market market(cfg, sc.seller, buyer, options);
    const EpisodeResult r = market.run();
    if (results) results->push_back(r);
    log.push_back(buyer.episode_log());
  }
  return log;
}

std::vector<EpisodeResult> evaluate_actor(ActorCritic& ac, const std::vector<Scenario>& scenarios,
                                          std::uint64_t episodes, std::uint64_t seed) {
  LearningBuyer buyer(ac, nullptr, {false, Exploration::Exploit, true, seed});
  return run_campaign(buyer, scenarios, episodes, seed);
}

std::vector<EpisodeResult> evaluate_network(const PolicyNetwork& net,
                                            const std::vector<Scenario>& scenarios,
                                            std::uint64_t episodes, std::uint64_t seed) {
  Rng init = derive_rng(seed, 400);
  ActorCritic ac(net, DdpgConfig{}, init);
  return evaluate_actor(ac, scenarios, episodes, seed);
}

PolicyNetwork random_policy(std::uint64_t seed) {
  Rng rng = derive_rng(seed, 401);
  return PolicyNetwork(PolicyArchitecture{}, rng);
}

SlResult pretrain(const DatasetSpec& data, const TrainConfig& cfg) {
  const Dataset rows = generate_dataset(data);
  if (rows.empty()) throw EmptyDataset();
  Rng init = derive_rng(cfg.seed, 402);
  PolicyArchitecture arch;
  arch.dropout = cfg.dropout_rate;
  SlResult out{PolicyNetwork(arch, init), {}, rows.size()};
  out.history = train_supervised(out.net, rows, cfg);
  return out;
}


namespace {

struct ModeName {
  RunMode mode;
  const char* name;
};

constexpr ModeName kModes[] = {
    {RunMode::GenData, "gen-data"},         {RunMode::TrainSl, "train-sl"},
    {RunMode::TrainRl, "train-rl"},         {RunMode::Evaluate, "evaluate"},
    {RunMode::HypothesisA, "hypothesis-a"}, {RunMode::HypothesisB, "hypothesis-b"},
    {RunMode::HypothesisC, "hypothesis-c"},
};

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  for (auto& f : split_csv_line(text)) {
    if (!f.empty()) out.push_back(std::move(f));
  }
  return out;
}

template <class T, class Parse, std::size_t N>
std::vector<T> parse_knob(const std::optional<std::string>& text, const T (&all)[N],
                          const std::vector<T>& fallback, Parse parse, const char* what,
                          std::vector<std::string>* errors) {
  if (!text) return fallback;
  if (*text == "all") return {std::begin(all), std::end(all)};
  std::vector<T> out;
  for (const auto& item : split_list(*text)) {
    if (auto v = parse(item)) {
      if (std::find(out.begin(), out.end(), *v) == out.end()) out.push_back(*v);
    } else if (errors) {
      errors->push_back(std::string("unknown ") + what + " '" + item + "'");
    }
  }
  if (out.empty() && errors && errors->empty()) {
    errors->push_back(std::string("empty ") + what + " list");
  }
  return out;
}

std::string join(const std::vector<std::string>& xs, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

std::vector<SellerStrategyId> default_sellers(RunMode mode) {
  switch (mode) {
    case RunMode::HypothesisA:
      return {SellerStrategyId::TimeFamily, SellerStrategyId::BehaviourFamily};
    default:
      return {SellerStrategyId::Conceder, SellerStrategyId::RelTft};
  }
}

std::vector<SellerStrategyId> resolve_sellers(const ExperimentSpec& spec,
                                              std::vector<std::string>* errors) {
  if (spec.sellers.empty()) return default_sellers(spec.mode);
  std::vector<SellerStrategyId> out;
  for (const auto& s : spec.sellers) {
    for (const auto& item : split_list(s)) {
      if (auto id = parse_seller_id(item)) {
        if (std::find(out.begin(), out.end(), *id) == out.end()) out.push_back(*id);
      } else if (errors) {
        errors->push_back("unknown seller id '" + item + "' (valid: " +
                          join(valid_seller_ids(), ", ") + ")");
      }
    }
  }
  return out;
}

// Market settings selected by the knob flags. Unset knobs sweep every value
// in hypothesis-a and stay at the favourable setting elsewhere.
std::vector<MarketConfig> resolve_settings(const ExperimentSpec& spec,
                                           std::vector<std::string>* errors) {
  const bool sweep = spec.mode == RunMode::HypothesisA;
  const std::vector<Level> all_levels(std::begin(kAllLevels), std::end(kAllLevels));
  const auto md = parse_knob(spec.md, kAllLevels, sweep ? all_levels : std::vector{Level::L},
                             parse_level, "md level", errors);
  const auto mr = parse_knob(spec.mr, kAllLevels, sweep ? all_levels : std::vector{Level::H},
                             parse_level, "mr level", errors);
  const auto zoa = parse_knob(
      spec.zoa, kAllZoas,
      sweep ? std::vector<Zoa>(std::begin(kAllZoas), std::end(kAllZoas))
            : std::vector{Zoa::A60, Zoa::H100},
      parse_zoa, "zoa level", errors);
  const auto dl = parse_knob(
      spec.deadline, kAllDeadlines,
      sweep ? std::vector<DeadlineClass>(std::begin(kAllDeadlines), std::end(kAllDeadlines))
            : std::vector{DeadlineClass::Lg},
      parse_deadline, "deadline class", errors);
  std::vector<MarketConfig> out;
  for (auto a : md)
    for (auto b : mr)
      for (auto z : zoa)
        for (auto d : dl) out.push_back({a, b, z, d, 0});
  return out;
}

std::vector<Scenario> scenarios_for(const std::vector<MarketConfig>& settings,
                                    SellerStrategyId seller) {
  std::vector<Scenario> out;
  for (const auto& m : settings) out.push_back({m, seller});
  return out;
}

std::vector<Scenario> scenarios_for(const std::vector<MarketConfig>& settings,
                                    const std::vector<SellerStrategyId>& sellers) {
  std::vector<Scenario> out;
  for (auto s : sellers) {
    for (const auto& m : settings) out.push_back({m, s});
  }
  return out;
}

bool mode_reads_sl(RunMode m) {
  return m == RunMode::TrainRl || m == RunMode::Evaluate || m == RunMode::HypothesisB ||
         m == RunMode::HypothesisC;
}

// Episode counts actually used by a run.
struct Budget {
  std::uint64_t dataset = 0;
  std::uint64_t train = 0;
  std::uint64_t test = 0;
  std::uint64_t sweep = 0;
  std::uint64_t adapt = 0;
};

Budget budget_for(const ExperimentSpec& spec) {
  const std::uint64_t scale = std::max<std::uint64_t>(1, spec.scale);
  auto scaled = [&](std::uint64_t n) { return std::max<std::uint64_t>(1, n / scale); };
  Budget b{scaled(spec.dataset_episodes), scaled(spec.train_episodes), scaled(spec.test_episodes),
           scaled(spec.sweep_episodes), scaled(spec.adapt_episodes)};
  if (spec.episodes) {
    switch (spec.mode) {
      case RunMode::GenData:
      case RunMode::TrainSl: b.dataset = *spec.episodes; break;
      case RunMode::TrainRl: b.train = *spec.episodes; break;
      case RunMode::HypothesisA: b.sweep = *spec.episodes; break;
      case RunMode::Evaluate:
      case RunMode::HypothesisB:
      case RunMode::HypothesisC: b.test = *spec.episodes; break;
    }
  }
  return b;
}

TeacherParams resolve_teacher(const ExperimentSpec& spec) {
  if (spec.teacher == "default") return TeacherParams{};
  return load_teacher_params(spec.teacher);
}

SummaryKey key_for(std::string strategy, SellerStrategyId seller,
                   const std::vector<MarketConfig>& settings) {
  std::set<std::string> zoa, md, mr, dl;
  std::vector<std::string> zv, mdv, mrv, dv;
  auto add = [](std::set<std::string>& seen, std::vector<std::string>& v, std::string s) {
    if (seen.insert(s).second) v.push_back(std::move(s));
  };
  for (const auto& m : settings) {
    add(zoa, zv, to_string(m.zoa));
    add(md, mdv, to_string(m.md));
    add(mr, mrv, to_string(m.mr));
    add(dl, dv, to_string(m.deadline_class));
  }
  return {std::move(strategy), to_string(seller), join(zv, "+"), join(mdv, "+"), join(mrv, "+"),
          join(dv, "+")};
}

constexpr std::string_view kResultsPrefix = "strategy,seller,zoa,md,mr,deadline,";

// Collects per-episode rows and campaign summaries for one run.
class Report {
 public:
  explicit Report(const std::filesystem::path& dir) : dir_(dir) {}

  CampaignSummary add(const std::string& strategy, const std::vector<Scenario>& scenarios,
                      const std::vector<EpisodeResult>& results, SummaryKey key) {
    for (const auto& r : results) {
      const Scenario& sc = scenarios[r.episode_id % scenarios.size()];
      results_.push_back(strategy + "," + to_string(sc.seller) + "," + to_string(sc.market.zoa) +
                         "," + to_string(sc.market.md) + "," + to_string(sc.market.mr) + "," +
                         to_string(sc.market.deadline_class) + "," + format_result_row(r));
    }
    const CampaignSummary s = summarize(results);
    summary_.push_back(format_summary_row(key, s));
    return s;
  }

  void write(std::vector<std::string>& files) {
    CsvWriter res(dir_ / "results.csv", std::string(kResultsPrefix) + std::string(kResultsHeader));
    for (const auto& r : results_) res.row(r);
    res.close();
    CsvWriter sum(dir_ / "summary.csv", kSummaryHeader);
    for (const auto& r : summary_) sum.row(r);
    sum.close();
    files.push_back("results.csv");
    files.push_back("summary.csv");
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> results_;
  std::vector<std::string> summary_;
};

void write_history(const TrainHistory& h, const std::filesystem::path& path) {
  CsvWriter w(path, kHistoryHeader);
  for (const auto& e : h.epochs) w.row(format_history_row(e));
  w.close();
}

void write_training_log(const std::vector<TrainingLogRow>& rows, const std::filesystem::path& path) {
  CsvWriter w(path, kTrainingLogHeader);
  for (const auto& r : rows) w.row(format_training_row(r));
  w.close();
}

std::string fmt_opt(const std::optional<MeanSd>& m, double scale = 1.0) {
  return m ? format_number(m->mean / scale) : "N/A";
}

// Derived master seeds keep training and evaluation markets disjoint.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return derive_rng(seed, stream, index)();
}

struct RunContext {
  const ExperimentSpec& spec;
  std::ostream& log;
  Budget budget;
  std::vector<MarketConfig> settings;
  std::vector<SellerStrategyId> sellers;
  TeacherParams teacher;
  std::vector<std::string> files;
  nlohmann::json extra = nlohmann::json::object();

  std::filesystem::path path(const std::string& name) {
    files.push_back(name);
    return spec.out / name;
  }

  TrainConfig sl_config() const {
    TrainConfig c = spec.sl;
    c.seed = sub_seed(spec.seed, 600);
    return c;
  }

  DatasetSpec dataset_spec(const std::vector<Scenario>& scenarios) const {
    return DatasetSpec{scenarios, budget.dataset, sub_seed(spec.seed, 601), teacher};
  }

  PolicyNetwork sl_network(const std::vector<Scenario>& scenarios, const std::string& tag) {
    if (spec.sl_checkpoint) {
      log << "loading SL policy " << spec.sl_checkpoint->string() << "\n";
      return load_policy(*spec.sl_checkpoint);
    }
    log << "pretraining SL policy" << (tag.empty() ? "" : " (" + tag + ")") << " on "
        << budget.dataset << " teacher episodes\n";
    SlResult sl = pretrain(dataset_spec(scenarios), sl_config());
    const std::string suffix = tag.empty() ? "" : "_" + tag;
    save_policy(sl.net, path("sl_policy" + suffix + ".txt"));
    write_history(sl.history, path("sl_history" + suffix + ".csv"));
    if (!sl.history.epochs.empty()) {
      const auto& last = sl.history.epochs.back();
      log << "  rows " << sl.rows << ", val accuracy " << format_number(last.val_accuracy)
          << ", val offer rmse " << format_number(last.val_offer_rmse) << "\n";
    }
    return std::move(sl.net);
  }

  // Fresh actor-critic around `actor`; `index` separates parallel agents.
  std::unique_ptr<ActorCritic> make_agent(PolicyNetwork actor, std::uint64_t index) const {
    Rng init = derive_rng(spec.seed, 403, index);
    return std::make_unique<ActorCritic>(std::move(actor), spec.rl, init);
  }

  std::vector<TrainingLogRow> train(ActorCritic& ac, ReplayBuffer& buffer,
                                    const std::vector<Scenario>& scenarios, std::uint64_t episodes,
                                    std::uint64_t campaign_seed, const std::string& what) {
    log << "training " << what << " for " << episodes << " episodes\n";
    return train_actor_critic(ac, buffer, scenarios, episodes, campaign_seed,
                              spec.illegal == IllegalHandling::Mask);
  }
};

void run_gen_data(RunContext& ctx) {
  const auto scenarios = scenarios_for(ctx.settings, ctx.sellers);
  ctx.log << "generating teacher data from " << ctx.budget.dataset << " episodes\n";
  const Dataset data = generate_dataset(ctx.dataset_spec(scenarios));
  write_dataset_csv(data, ctx.path("dataset.csv"));
  const CorrelationReport corr = attribute_correlation(data);
  write_correlation_csv(corr, ctx.path("correlation.csv"));
  ctx.log << "  rows " << data.size() << ", max |rho| " << format_number(corr.max_off_diagonal())
          << "\n";
  ctx.extra["rows"] = data.size();
}

void run_train_sl(RunContext& ctx) {
  Dataset data;
  if (ctx.spec.dataset) {
    data = read_dataset_csv(*ctx.spec.dataset);
  } else {
    const auto scenarios = scenarios_for(ctx.settings, ctx.sellers);
    ctx.log << "generating teacher data from " << ctx.budget.dataset << " episodes\n";
    data = generate_dataset(ctx.dataset_spec(scenarios));
    write_dataset_csv(data, ctx.path("dataset.csv"));
  }
  if (data.empty()) throw EmptyDataset();
  const TrainConfig cfg = ctx.sl_config();
  Rng init = derive_rng(cfg.seed, 402);
  PolicyArchitecture arch;
  arch.dropout = cfg.dropout_rate;
  PolicyNetwork net(arch, init);
  ctx.log << "training SL policy on " << data.size() << " rows\n";
  const TrainHistory h = train_supervised(net, data, cfg);
  save_policy(net, ctx.path("sl_policy.txt"));
  write_history(h, ctx.path("sl_history.csv"));
  for (const auto& e : h.epochs) ctx.log << "  " << format_history_row(e) << "\n";
  ctx.extra["rows"] = data.size();
}

void run_train_rl(RunContext& ctx) {
  const auto scenarios = scenarios_for(ctx.settings, ctx.sellers);
  PolicyNetwork start = ctx.spec.sl_checkpoint ? load_policy(*ctx.spec.sl_checkpoint)
                                               : random_policy(ctx.spec.seed);
  auto ac = ctx.make_agent(std::move(start), 0);
  ReplayBuffer buffer(ctx.spec.rl.capacity);
  const auto log = ctx.train(*ac, buffer, scenarios, ctx.budget.train, ctx.spec.seed,
                             ctx.spec.sl_checkpoint ? "SL+RL agent" : "RL agent");
  ac->save(ctx.path("actor_critic.txt"));
  write_training_log(log, ctx.path("training_log.csv"));
  ctx.extra["initialization"] = ctx.spec.sl_checkpoint ? "sl" : "random";
}

void run_evaluate(RunContext& ctx) {
  Report report(ctx.spec.out);
  std::unique_ptr<ActorCritic> ac;
  std::optional<PolicyNetwork> net;
  std::string strategy = "teacher";
  if (ctx.spec.rl_checkpoint) {
    ac = ActorCritic::load(*ctx.spec.rl_checkpoint, ctx.spec.rl);
    strategy = "actor-critic";
  } else if (ctx.spec.sl_checkpoint) {
    net = load_policy(*ctx.spec.sl_checkpoint);
    strategy = "sl-only";
  }
  for (auto seller : ctx.sellers) {
    for (const auto& m : ctx.settings) {
      const std::vector<Scenario> sc{{m, seller}};
      std::vector<EpisodeResult> res;
      if (ac) {
        res = evaluate_actor(*ac, sc, ctx.budget.test, ctx.spec.seed);
      } else if (net) {
        res = evaluate_network(*net, sc, ctx.budget.test, ctx.spec.seed);
      } else {
        TeacherPolicy t(ctx.teacher);
        res = run_campaign(t, sc, ctx.budget.test, ctx.spec.seed);
      }
      const auto s = report.add(strategy, sc, res, key_for(strategy, seller, {m}));
      ctx.log << "  " << to_string(seller) << " " << to_string(m.md) << "/" << to_string(m.mr)
              << "/" << to_string(m.zoa) << "/" << to_string(m.deadline_class) << ": S% "
              << format_number(s.s_pct) << "\n";
    }
  }
  report.write(ctx.files);
}

void run_hypothesis_a(RunContext& ctx) {
  Report report(ctx.spec.out);
  // (seller, md, zoa) -> successes, episodes
  std::map<std::tuple<std::string, int, int>, std::pair<std::uint64_t, std::uint64_t>> bars;
  for (auto seller : ctx.sellers) {
    ctx.log << "sweeping " << ctx.settings.size() << " settings against " << to_string(seller)
            << " (" << ctx.budget.sweep << " episodes each)\n";
    for (const auto& m : ctx.settings) {
      const std::vector<Scenario> sc{{m, seller}};
      TeacherPolicy t(ctx.teacher);
      const auto res = run_campaign(t, sc, ctx.budget.sweep, ctx.spec.seed);
      report.add("teacher", sc, res, key_for("teacher", seller, {m}));
      auto& bar = bars[{to_string(seller), static_cast<int>(m.md), static_cast<int>(m.zoa)}];
      for (const auto& r : res) bar.first += r.success ? 1 : 0;
      bar.second += res.size();
    }
  }
  report.write(ctx.files);
  CsvWriter plot(ctx.path("plot_success_by_md_zoa.csv"), "seller,md,zoa,s_pct,n");
  for (const auto& [k, v] : bars) {
    const auto& [seller, md, zoa] = k;
    plot.row(seller + "," + to_string(static_cast<Level>(md)) + "," +
             to_string(static_cast<Zoa>(zoa)) + "," +
             format_number(100.0 * static_cast<double>(v.first) / static_cast<double>(v.second)) +
             "," + std::to_string(v.second));
  }
  plot.close();
}

void run_hypothesis_b(RunContext& ctx) {
  Report report(ctx.spec.out);
  CsvWriter plot(ctx.path("plot_strategies.csv"), "seller,strategy,u_avg,t_avg_s,s_pct");
  std::uint64_t agent = 0;
  for (auto seller : ctx.sellers) {
    const std::string tag = to_string(seller);
    const auto scenarios = scenarios_for(ctx.settings, seller);
    const std::uint64_t train_seed = sub_seed(ctx.spec.seed, 500, static_cast<std::uint64_t>(seller));
    const PolicyNetwork sl = ctx.sl_network(scenarios, tag);

    auto sl_rl = ctx.make_agent(sl, agent++);
    ReplayBuffer buf_a(ctx.spec.rl.capacity);
    write_training_log(ctx.train(*sl_rl, buf_a, scenarios, ctx.budget.train, train_seed, "SL+RL " + tag),
                       ctx.path("training_log_" + tag + "_sl_rl.csv"));
    sl_rl->save(ctx.path("actor_critic_" + tag + "_sl_rl.txt"));

    auto rl = ctx.make_agent(random_policy(sub_seed(ctx.spec.seed, 404, agent)), agent);
    ++agent;
    ReplayBuffer buf_b(ctx.spec.rl.capacity);
    write_training_log(ctx.train(*rl, buf_b, scenarios, ctx.budget.train, train_seed, "RL " + tag),
                       ctx.path("training_log_" + tag + "_rl.csv"));
    rl->save(ctx.path("actor_critic_" + tag + "_rl.txt"));

    ctx.log << "evaluating four strategies against " << tag << " on " << ctx.budget.test
            << " paired episodes\n";
    TeacherPolicy teacher(ctx.teacher);
    const std::pair<std::string, std::vector<EpisodeResult>> runs[] = {
        {"teacher", run_campaign(teacher, scenarios, ctx.budget.test, ctx.spec.seed)},
        {"sl-only", evaluate_network(sl, scenarios, ctx.budget.test, ctx.spec.seed)},
        {"sl+rl", evaluate_actor(*sl_rl, scenarios, ctx.budget.test, ctx.spec.seed)},
        {"rl-only", evaluate_actor(*rl, scenarios, ctx.budget.test, ctx.spec.seed)},
    };
    for (const auto& [name, res] : runs) {
      const auto s = report.add(name, scenarios, res, key_for(name, seller, ctx.settings));
      plot.row(tag + "," + name + "," + fmt_opt(s.u) + "," + fmt_opt(s.t, 1000.0) + "," +
               format_number(s.s_pct));
      ctx.log << "  " << name << ": U " << fmt_opt(s.u) << ", T " << fmt_opt(s.t, 1000.0)
              << " s, S% " << format_number(s.s_pct) << "\n";
    }
  }
  plot.close();
  report.write(ctx.files);
}

void run_hypothesis_c(RunContext& ctx) {
  if (ctx.sellers.size() != 2) throw std::invalid_argument("hypothesis-c needs exactly two sellers");
  Report report(ctx.spec.out);
  CsvWriter plot(ctx.path("plot_adaptation.csv"), "trained_on,evaluated_on,strategy,s_pct");
  for (std::size_t dir = 0; dir < 2; ++dir) {
    const SellerStrategyId from = ctx.sellers[dir];
    const SellerStrategyId to = ctx.sellers[1 - dir];
    const std::string from_tag = to_string(from);
    const std::string to_tag = to_string(to);
    const auto train_sc = scenarios_for(ctx.settings, from);
    const auto eval_sc = scenarios_for(ctx.settings, to);

    const PolicyNetwork sl = ctx.sl_network(train_sc, from_tag);
    auto ac = ctx.make_agent(sl, dir);
    ReplayBuffer buffer(ctx.spec.rl.capacity);
    auto log = ctx.train(*ac, buffer, train_sc, ctx.budget.train,
                         sub_seed(ctx.spec.seed, 500, static_cast<std::uint64_t>(from)),
                         "SL+RL on " + from_tag);
    const auto adapt = ctx.train(*ac, buffer, eval_sc, ctx.budget.adapt,
                                 sub_seed(ctx.spec.seed, 501, static_cast<std::uint64_t>(to)),
                                 "adaptation on " + to_tag);
    for (auto row : adapt) {
      row.episode += ctx.budget.train;
      log.push_back(row);
    }
    write_training_log(log, ctx.path("training_log_" + from_tag + "_to_" + to_tag + ".csv"));
    ac->save(ctx.path("actor_critic_" + from_tag + "_to_" + to_tag + ".txt"));

    ctx.log << "evaluating on " << to_tag << " over " << ctx.budget.test << " paired episodes\n";
    TeacherPolicy teacher(ctx.teacher);
    const std::pair<std::string, std::vector<EpisodeResult>> runs[] = {
        {"teacher", run_campaign(teacher, eval_sc, ctx.budget.test, ctx.spec.seed)},
        {"sl-only", evaluate_network(sl, eval_sc, ctx.budget.test, ctx.spec.seed)},
        {"sl+rl", evaluate_actor(*ac, eval_sc, ctx.budget.test, ctx.spec.seed)},
    };
    for (const auto& [name, res] : runs) {
      const std::string label = name + "[" + from_tag + "]";
      const auto s = report.add(label, eval_sc, res, key_for(label, to, ctx.settings));
      plot.row(from_tag + "," + to_tag + "," + name + "," + format_number(s.s_pct));
      ctx.log << "  " << label << ": U " << fmt_opt(s.u) << ", S% " << format_number(s.s_pct)
              << "\n";
    }
  }
  plot.close();
  report.write(ctx.files);
}

nlohmann::json spec_json(const ExperimentSpec& spec, const Budget& b) {
  nlohmann::json j;
  j["mode"] = to_string(spec.mode);
  j["seed"] = spec.seed;
  j["scale"] = spec.scale;
  j["sellers"] = spec.sellers;
  auto opt = [](const std::optional<std::string>& s) -> nlohmann::json {
    return s ? nlohmann::json(*s) : nlohmann::json(nullptr);
  };
  auto opt_path = [](const std::optional<std::filesystem::path>& p) -> nlohmann::json {
    return p ? nlohmann::json(p->generic_string()) : nlohmann::json(nullptr);
  };
  j["md"] = opt(spec.md);
  j["mr"] = opt(spec.mr);
  j["zoa"] = opt(spec.zoa);
  j["deadline"] = opt(spec.deadline);
  j["sl_checkpoint"] = opt_path(spec.sl_checkpoint);
  j["rl_checkpoint"] = opt_path(spec.rl_checkpoint);
  j["dataset"] = opt_path(spec.dataset);
  j["illegal"] = spec.illegal == IllegalHandling::Mask ? "mask" : "abort";
  j["teacher"] = spec.teacher;
  j["episodes"] = {{"dataset", b.dataset}, {"train", b.train}, {"test", b.test},
                   {"sweep", b.sweep},     {"adapt", b.adapt}};
  j["sl"] = {{"learning_rate", spec.sl.learning_rate}, {"batch_size", spec.sl.batch_size},
             {"epochs", spec.sl.epochs},               {"dropout", spec.sl.dropout_rate},
             {"validation_fraction", spec.sl.validation_fraction},
             {"offer_weight", spec.sl.offer_weight}};
  j["rl"] = {{"capacity", spec.rl.capacity},
             {"batch", spec.rl.batch},
             {"gamma", spec.rl.gamma},
             {"tau", spec.rl.tau},
             {"noise", spec.rl.noise_scale},
             {"actor_lr", spec.rl.actor_lr},
             {"critic_lr", spec.rl.critic_lr},
             {"critic_hidden", spec.rl.critic_hidden},
             {"updates_per_step", spec.rl.updates_per_step},
             {"train_every", spec.rl.train_every},
             {"d_t", spec.rl.reward.d_t},
             {"discount", to_string(spec.rl.reward.variant)}};
  return j;
}

}  // namespace

const char* to_string(RunMode m) {
  for (const auto& e : kModes) {
    if (e.mode == m) return e.name;
  }
  return "?";
}

std::optional<RunMode> parse_run_mode(std::string_view text) {
  for (const auto& e : kModes) {
    if (text == e.name) return e.mode;
  }
  return std::nullopt;
}

std::vector<std::string> validate_spec(const ExperimentSpec& spec) {
  std::vector<std::string> out;
  if (spec.episodes && *spec.episodes == 0) out.emplace_back("episodes must be >= 1");
  if (spec.scale == 0) out.emplace_back("scale must be >= 1");
  for (auto n : {spec.test_episodes, spec.train_episodes, spec.sweep_episodes,
                 spec.adapt_episodes, spec.dataset_episodes}) {
    if (n == 0) {
      out.emplace_back("episode counts must be >= 1");
      break;
    }
  }
  const auto sellers = resolve_sellers(spec, &out);
  if (sellers.empty() && !spec.sellers.empty() && out.empty()) out.emplace_back("no seller given");
  resolve_settings(spec, &out);
  if (spec.mode == RunMode::HypothesisC && sellers.size() != 2) {
    out.emplace_back("hypothesis-c needs exactly two sellers (trained on, evaluated on)");
  }
  for (auto& e : spec.sl.validate()) out.push_back(std::move(e));
  for (auto& e : spec.rl.validate()) out.push_back(std::move(e));

  namespace fs = std::filesystem;
  auto need_file = [&](const std::optional<fs::path>& p, const char* what) {
    if (p && !fs::is_regular_file(*p)) out.push_back(std::string(what) + " not found: " + p->string());
  };
  if (spec.sl_checkpoint && !mode_reads_sl(spec.mode)) {
    out.push_back(std::string("--sl-checkpoint is not used by ") + to_string(spec.mode));
  }
  need_file(spec.sl_checkpoint, "SL checkpoint");
  if (spec.rl_checkpoint && spec.mode != RunMode::Evaluate) {
    out.emplace_back("--rl-checkpoint is only used by evaluate");
  }
  need_file(spec.rl_checkpoint, "RL checkpoint");
  if (spec.dataset && spec.mode != RunMode::TrainSl) {
    out.emplace_back("a dataset input is only used by train-sl");
  }
  need_file(spec.dataset, "dataset");
  if (spec.teacher != "default" && !fs::is_regular_file(spec.teacher)) {
    out.push_back("teacher parameter file not found: " + spec.teacher);
  }
  if (spec.out.empty()) out.emplace_back("output directory is empty");
  return out;
}

void apply_config_file(ExperimentSpec& spec, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "mode") {
        auto m = parse_run_mode(v.get<std::string>());
        if (!m) throw std::invalid_argument("unknown mode '" + v.get<std::string>() + "'");
        spec.mode = *m;
      } else if (key == "seed") {
        spec.seed = v.get<std::uint64_t>();
      } else if (key == "episodes") {
        spec.episodes = v.get<std::uint64_t>();
      } else if (key == "scale") {
        spec.scale = v.get<std::uint64_t>();
      } else if (key == "seller") {
        spec.sellers = v.is_array() ? v.get<std::vector<std::string>>()
                                    : std::vector<std::string>{v.get<std::string>()};
      } else if (key == "md") {
        spec.md = v.get<std::string>();
      } else if (key == "mr") {
        spec.mr = v.get<std::string>();
      } else if (key == "zoa") {
        spec.zoa = v.get<std::string>();
      } else if (key == "deadline") {
        spec.deadline = v.get<std::string>();
      } else if (key == "sl_checkpoint") {
        spec.sl_checkpoint = v.get<std::string>();
      } else if (key == "rl_checkpoint") {
        spec.rl_checkpoint = v.get<std::string>();
      } else if (key == "dataset") {
        spec.dataset = v.get<std::string>();
      } else if (key == "out") {
        spec.out = v.get<std::string>();
      } else if (key == "illegal") {
        const auto s = v.get<std::string>();
        if (s == "mask") spec.illegal = IllegalHandling::Mask;
        else if (s == "abort") spec.illegal = IllegalHandling::Abort;
        else throw std::invalid_argument("illegal must be mask or abort");
      } else if (key == "teacher") {
        spec.teacher = v.get<std::string>();
      } else if (key == "test_episodes") {
        spec.test_episodes = v.get<std::uint64_t>();
      } else if (key == "train_episodes") {
        spec.train_episodes = v.get<std::uint64_t>();
      } else if (key == "sweep_episodes") {
        spec.sweep_episodes = v.get<std::uint64_t>();
      } else if (key == "adapt_episodes") {
        spec.adapt_episodes = v.get<std::uint64_t>();
      } else if (key == "dataset_episodes") {
        spec.dataset_episodes = v.get<std::uint64_t>();
      } else if (key == "sl") {
        for (const auto& [k, x] : v.items()) {
          if (k == "learning_rate") spec.sl.learning_rate = x.get<double>();
          else if (k == "batch_size") spec.sl.batch_size = x.get<int>();
          else if (k == "epochs") spec.sl.epochs = x.get<int>();
          else if (k == "dropout") spec.sl.dropout_rate = x.get<double>();
          else if (k == "validation_fraction") spec.sl.validation_fraction = x.get<double>();
          else if (k == "offer_weight") spec.sl.offer_weight = x.get<double>();
          else throw std::invalid_argument("unknown sl key '" + k + "'");
        }
      } else if (key == "rl") {
        for (const auto& [k, x] : v.items()) {
          if (k == "capacity") spec.rl.capacity = x.get<std::size_t>();
          else if (k == "batch") spec.rl.batch = x.get<std::size_t>();
          else if (k == "gamma") spec.rl.gamma = x.get<double>();
          else if (k == "tau") spec.rl.tau = x.get<double>();
          else if (k == "noise") spec.rl.noise_scale = x.get<double>();
          else if (k == "actor_lr") spec.rl.actor_lr = x.get<double>();
          else if (k == "critic_lr") spec.rl.critic_lr = x.get<double>();
          else if (k == "critic_hidden") spec.rl.critic_hidden = x.get<std::vector<int>>();
          else if (k == "updates_per_step") spec.rl.updates_per_step = x.get<int>();
          else if (k == "train_every") spec.rl.train_every = x.get<int>();
          else if (k == "d_t") spec.rl.reward.d_t = x.get<double>();
          else if (k == "discount") {
            auto d = parse_discount_variant(x.get<std::string>());
            if (!d) throw std::invalid_argument("discount must be as_written or inverted");
            spec.rl.reward.variant = *d;
          } else {
            throw std::invalid_argument("unknown rl key '" + k + "'");
          }
        }
      } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
}

void run_experiment(const ExperimentSpec& spec, std::ostream& log) {
  if (auto errs = validate_spec(spec); !errs.empty()) {
    throw std::invalid_argument(join(errs, "; "));
  }
  std::error_code ec;
  std::filesystem::create_directories(spec.out, ec);
  if (ec || !std::filesystem::is_directory(spec.out)) {
    throw std::runtime_error("cannot create output directory " + spec.out.string());
  }
  RunContext ctx{spec, log, budget_for(spec), resolve_settings(spec, nullptr),
                 resolve_sellers(spec, nullptr), resolve_teacher(spec), {}};
  log << "mode " << to_string(spec.mode) << ", seed " << spec.seed << "\n";
  switch (spec.mode) {
    case RunMode::GenData: run_gen_data(ctx); break;
    case RunMode::TrainSl: run_train_sl(ctx); break;
    case RunMode::TrainRl: run_train_rl(ctx); break;
    case RunMode::Evaluate: run_evaluate(ctx); break;
    case RunMode::HypothesisA: run_hypothesis_a(ctx); break;
    case RunMode::HypothesisB: run_hypothesis_b(ctx); break;
    case RunMode::HypothesisC: run_hypothesis_c(ctx); break;
  }

  nlohmann::json manifest;
  manifest["tool"] = "negsim";
  manifest["version"] = NEGSIM_VERSION;
  manifest["spec"] = spec_json(spec, ctx.budget);
  manifest["settings"] = ctx.settings.size();
  std::vector<std::string> sellers;
  for (auto s : ctx.sellers) sellers.emplace_back(to_string(s));
  manifest["resolved_sellers"] = sellers;
  manifest["files"] = ctx.files;
  manifest["details"] = ctx.extra;
  std::ofstream out(spec.out / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest in " + spec.out.string());
  out << manifest.dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing manifest");
}

}  // namespace negsim

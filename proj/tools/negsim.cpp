#include <CLI11.hpp>
#include <iostream>

#include "negsim/experiment.hpp"

int main(int argc, char** argv) {
  using namespace negsim;
  CLI::App app{"Concurrent negotiation market simulator and learning buyer"};

  std::string mode;
  std::string config;
  std::optional<std::uint64_t> seed, episodes, scale;
  std::vector<std::string> sellers;
  std::optional<std::string> md, mr, zoa, deadline, sl_ckpt, rl_ckpt, dataset, out, illegal, teacher;
  bool quiet = false;

  app.add_option("--mode", mode,
                 "gen-data | train-sl | train-rl | evaluate | hypothesis-a | hypothesis-b | "
                 "hypothesis-c");
  app.add_option("--config", config, "JSON config file; flags override it")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--episodes", episodes, "Episode count of the mode's main campaign");
  app.add_option("--scale", scale, "Divide default episode counts by this factor");
  app.add_option("--seller", sellers, "Seller id(s); comma separated or repeated");
  app.add_option("--zoa", zoa, "ZoA level(s): 100,60,10 or all");
  app.add_option("--md", md, "Market density level(s): H,A,L or all");
  app.add_option("--mr", mr, "Market ratio level(s): H,A,L or all");
  app.add_option("--deadline", deadline, "Deadline class(es): Lg,A,Sh or all");
  app.add_option("--sl-checkpoint", sl_ckpt, "Supervised policy checkpoint");
  app.add_option("--rl-checkpoint", rl_ckpt, "Actor-critic checkpoint (evaluate)");
  app.add_option("--dataset", dataset, "Dataset CSV for train-sl");
  app.add_option("--teacher", teacher, "Teacher parameter JSON, or 'default'");
  app.add_option("--out", out, "Output directory");
  app.add_option("--illegal", illegal, "Illegal action handling: mask | abort")
      ->check(CLI::IsMember({"mask", "abort"}));
  app.add_flag("--quiet", quiet, "Suppress progress output");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentSpec spec;
    if (!config.empty()) apply_config_file(spec, config);
    if (!mode.empty()) {
      auto m = parse_run_mode(mode);
      if (!m) throw std::invalid_argument("unknown mode '" + mode + "'");
      spec.mode = *m;
    } else if (config.empty()) {
      throw std::invalid_argument("--mode is required");
    }
    if (seed) spec.seed = *seed;
    if (episodes) spec.episodes = *episodes;
    if (scale) spec.scale = *scale;
    if (!sellers.empty()) spec.sellers = sellers;
    if (md) spec.md = md;
    if (mr) spec.mr = mr;
    if (zoa) spec.zoa = zoa;
    if (deadline) spec.deadline = deadline;
    if (sl_ckpt) spec.sl_checkpoint = *sl_ckpt;
    if (rl_ckpt) spec.rl_checkpoint = *rl_ckpt;
    if (dataset) spec.dataset = *dataset;
    if (teacher) spec.teacher = *teacher;
    if (out) spec.out = *out;
    if (illegal) spec.illegal = *illegal == "abort" ? IllegalHandling::Abort : IllegalHandling::Mask;

    if (auto errs = validate_spec(spec); !errs.empty()) {
      for (const auto& e : errs) std::cerr << "error: " << e << "\n";
      return 2;
    }
    std::ostream null_stream(nullptr);
    run_experiment(spec, quiet ? null_stream : std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "negsim/dataset.hpp"
#include "negsim/experiment.hpp"
#include "negsim/rewards.hpp"

namespace py = pybind11;
using namespace negsim;

namespace {

ExperimentSpec make_spec(const std::string& mode, const std::filesystem::path& out,
                         std::uint64_t seed, std::uint64_t scale,
                         std::optional<std::uint64_t> episodes, std::vector<std::string> sellers,
                         std::optional<std::string> md, std::optional<std::string> mr,
                         std::optional<std::string> zoa, std::optional<std::string> deadline,
                         std::optional<std::filesystem::path> sl_checkpoint,
                         std::optional<std::filesystem::path> rl_checkpoint) {
  const auto m = parse_run_mode(mode);
  if (!m) throw py::value_error("unknown mode '" + mode + "'");
  ExperimentSpec spec;
  spec.mode = *m;
  spec.out = out;
  spec.seed = seed;
  spec.scale = scale;
  spec.episodes = episodes;
  spec.sellers = std::move(sellers);
  spec.md = std::move(md);
  spec.mr = std::move(mr);
  spec.zoa = std::move(zoa);
  spec.deadline = std::move(deadline);
  spec.sl_checkpoint = std::move(sl_checkpoint);
  spec.rl_checkpoint = std::move(rl_checkpoint);
  return spec;
}

#define SPEC_ARGS                                                                              \
  py::arg("mode"), py::arg("out") = "out", py::arg("seed") = 1, py::arg("scale") = 1,         \
      py::arg("episodes") = py::none(), py::arg("sellers") = std::vector<std::string>{},      \
      py::arg("md") = py::none(), py::arg("mr") = py::none(), py::arg("zoa") = py::none(),    \
      py::arg("deadline") = py::none(), py::arg("sl_checkpoint") = py::none(),                \
      py::arg("rl_checkpoint") = py::none()

py::dict result_dict(const EpisodeResult& r) {
  py::dict d;
  d["episode_id"] = r.episode_id;
  d["success"] = r.success;
  d["agreement_price"] = r.agreement_price;
  d["duration_ms"] = r.duration_ms;
  d["utility"] = r.utility;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Concurrent bilateral negotiation simulator";
  m.attr("__version__") = NEGSIM_VERSION;

  m.def(
      "utility",
      [](double x, Millis t, double ip_b, double rp_b, Millis t_end, double d_t,
         const std::string& variant) {
        const auto v = parse_discount_variant(variant);
        if (!v) throw py::value_error("variant must be as_written or inverted");
        return utility(x, t, ip_b, rp_b, t_end, RewardSpec{d_t, *v});
      },
      py::arg("x"), py::arg("t"), py::arg("ip_b"), py::arg("rp_b"), py::arg("t_end"),
      py::arg("d_t") = 0.6, py::arg("variant") = "as_written");
  m.def("metric_utility", &metric_utility, py::arg("x"), py::arg("ip_b"), py::arg("rp_b"));
  m.def(
      "reward_regression",
      [](double x, const std::vector<double>& offers, Millis t, double ip_b, double rp_b,
         Millis t_end, double d_t) {
        return reward_regression(x, offers, t, BuyerTerms{ip_b, rp_b, t_end}, RewardSpec{d_t});
      },
      py::arg("x"), py::arg("offers"), py::arg("t"), py::arg("ip_b"), py::arg("rp_b"),
      py::arg("t_end"), py::arg("d_t") = 0.6);

  m.def("seller_ids", &valid_seller_ids);

  m.def(
      "run_teacher",
      [](const std::string& seller, const std::string& md, const std::string& mr,
         const std::string& zoa, const std::string& deadline, std::uint64_t episodes,
         std::uint64_t seed) {
        const auto s = parse_seller_id(seller);
        const auto lmd = parse_level(md);
        const auto lmr = parse_level(mr);
        const auto z = parse_zoa(zoa);
        const auto d = parse_deadline(deadline);
        if (!s || !lmd || !lmr || !z || !d) throw py::value_error("bad seller or market knob");
        TeacherPolicy teacher;
        const std::vector<Scenario> sc{{MarketConfig{*lmd, *lmr, *z, *d, 0}, *s}};
        std::vector<EpisodeResult> res;
        {
          py::gil_scoped_release release;
          res = run_campaign(teacher, sc, episodes, seed);
        }
        py::list out;
        for (const auto& r : res) out.append(result_dict(r));
        return out;
      },
      py::arg("seller") = "conceder", py::arg("md") = "L", py::arg("mr") = "H",
      py::arg("zoa") = "60", py::arg("deadline") = "Lg", py::arg("episodes") = 10,
      py::arg("seed") = 1);

  m.def(
      "generate_dataset",
      [](std::uint64_t episodes, std::uint64_t seed) {
        DatasetSpec spec = default_dataset_spec(seed);
        spec.episodes = episodes;
        Dataset data;
        {
          py::gil_scoped_release release;
          data = generate_dataset(spec);
        }
        RowMajorMatrix x(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(kFeatureDim));
        std::vector<std::string> labels;
        std::vector<std::optional<double>> offers;
        for (std::size_t i = 0; i < data.size(); ++i) {
          for (std::size_t j = 0; j < kFeatureDim; ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i].features[j];
          }
          labels.emplace_back(to_string(data[i].label_action));
          offers.push_back(data[i].label_offer);
        }
        return py::make_tuple(x, labels, offers);
      },
      py::arg("episodes") = 10, py::arg("seed") = 1,
      "Teacher dataset as (features[rows, 10], labels, offers).");

  m.def(
      "validate_spec",
      [](const std::string& mode, const std::filesystem::path& out, std::uint64_t seed,
         std::uint64_t scale, std::optional<std::uint64_t> episodes,
         std::vector<std::string> sellers, std::optional<std::string> md,
         std::optional<std::string> mr, std::optional<std::string> zoa,
         std::optional<std::string> deadline, std::optional<std::filesystem::path> sl,
         std::optional<std::filesystem::path> rl) {
        return validate_spec(make_spec(mode, out, seed, scale, episodes, std::move(sellers),
                                       std::move(md), std::move(mr), std::move(zoa),
                                       std::move(deadline), std::move(sl), std::move(rl)));
      },
      SPEC_ARGS);

  m.def(
      "run_experiment",
      [](const std::string& mode, const std::filesystem::path& out, std::uint64_t seed,
         std::uint64_t scale, std::optional<std::uint64_t> episodes,
         std::vector<std::string> sellers, std::optional<std::string> md,
         std::optional<std::string> mr, std::optional<std::string> zoa,
         std::optional<std::string> deadline, std::optional<std::filesystem::path> sl,
         std::optional<std::filesystem::path> rl) {
        const ExperimentSpec spec =
            make_spec(mode, out, seed, scale, episodes, std::move(sellers), std::move(md),
                      std::move(mr), std::move(zoa), std::move(deadline), std::move(sl),
                      std::move(rl));
        const auto problems = validate_spec(spec);
        if (!problems.empty()) {
          std::string msg;
          for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
          throw py::value_error(msg);
        }
        std::ostringstream log;
        {
          py::gil_scoped_release release;
          run_experiment(spec, log);
        }
        return log.str();
      },
      SPEC_ARGS, "Runs one mode, writing its artifacts under `out`; returns the progress log.");
}

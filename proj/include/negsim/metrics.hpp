#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "negsim/types.hpp"

namespace negsim {

struct EpisodeResult {
  std::uint64_t episode_id = 0;
  bool success = false;
  std::optional<Price> agreement_price;
  std::optional<Millis> duration_ms;  // present iff success
  std::optional<double> utility;      // undiscounted, present iff success
};

inline constexpr std::string_view kResultsHeader =
    "episode_id,success,agreement_price,duration_ms,utility";
std::string format_result_row(const EpisodeResult& r);

struct MeanSd {
  double mean = 0;
  double sd = 0;  // n - 1 denominator; 0 for a single sample
  std::size_t n = 0;
};

// Two-pass sample statistics; nullopt for an empty sample.
std::optional<MeanSd> mean_sd(std::span<const double> xs);

// Mean utility over successful episodes only.
std::optional<MeanSd> u_avg(std::span<const EpisodeResult> results);
// Mean duration (ms) over successful episodes only.
std::optional<MeanSd> t_avg(std::span<const EpisodeResult> results);

class EmptyCampaign : public std::invalid_argument {
 public:
  EmptyCampaign() : std::invalid_argument("campaign has no episodes") {}
};

double s_pct(std::span<const EpisodeResult> results);

struct CampaignSummary {
  std::optional<MeanSd> u;
  std::optional<MeanSd> t;
  double s_pct = 0;
  std::size_t episode_count = 0;
};

CampaignSummary summarize(std::span<const EpisodeResult> results);

// One row of the summary CSV; N/A for undefined means.
struct SummaryKey {
  std::string strategy;
  std::string seller;
  std::string zoa;
  std::string md;
  std::string mr;
  std::string deadline;
};

inline constexpr std::string_view kSummaryHeader =
    "strategy,seller,zoa,md,mr,deadline,u_avg,u_sd,t_avg,t_sd,s_pct,n";
std::string format_summary_row(const SummaryKey& key, const CampaignSummary& s);

}  // namespace negsim

#include "negsim/metrics.hpp"

#include <cmath>
#include <vector>

#include "negsim/csv.hpp"

namespace negsim {

std::string format_result_row(const EpisodeResult& r) {
  std::string line = std::to_string(r.episode_id);
  line += r.success ? ",1," : ",0,";
  if (r.agreement_price) line += format_number(*r.agreement_price);
  line += ',';
  if (r.duration_ms) line += std::to_string(*r.duration_ms);
  line += ',';
  if (r.utility) line += format_number(*r.utility);
  return line;
}

std::optional<MeanSd> mean_sd(std::span<const double> xs) {
  if (xs.empty()) return std::nullopt;
  double sum = 0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
  return MeanSd{mean, sd, xs.size()};
}

std::optional<MeanSd> u_avg(std::span<const EpisodeResult> results) {
  std::vector<double> xs;
  for (const auto& r : results) {
    if (r.success && r.utility) xs.push_back(*r.utility);
  }
  return mean_sd(xs);
}

std::optional<MeanSd> t_avg(std::span<const EpisodeResult> results) {
  std::vector<double> xs;
  for (const auto& r : results) {
    if (r.success && r.duration_ms) xs.push_back(static_cast<double>(*r.duration_ms));
  }
  return mean_sd(xs);
}

double s_pct(std::span<const EpisodeResult> results) {
  if (results.empty()) throw EmptyCampaign();
  std::size_t ok = 0;
  for (const auto& r : results) ok += r.success ? 1 : 0;
  return 100.0 * static_cast<double>(ok) / static_cast<double>(results.size());
}

CampaignSummary summarize(std::span<const EpisodeResult> results) {
  CampaignSummary s;
  s.u = u_avg(results);
  s.t = t_avg(results);
  s.s_pct = s_pct(results);
  s.episode_count = results.size();
  return s;
}

std::string format_summary_row(const SummaryKey& k, const CampaignSummary& s) {
  std::string line =
      k.strategy + ',' + k.seller + ',' + k.zoa + ',' + k.md + ',' + k.mr + ',' + k.deadline + ',';
  auto stat = [&](const std::optional<MeanSd>& m) {
    if (m) {
      line += format_number(m->mean) + ',' + format_number(m->sd) + ',';
    } else {
      line += "N/A,N/A,";
    }
  };
  stat(s.u);
  stat(s.t);
  line += format_number(s.s_pct) + ',' + std::to_string(s.episode_count);
  return line;
}

}  // namespace negsim

#include "negsim/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "negsim/csv.hpp"

namespace negsim {

double normalize_price(Price p) { return (p - kPriceFloor) / (kPriceCeiling - kPriceFloor); }
Price denormalize_price(double v) { return kPriceFloor + v * (kPriceCeiling - kPriceFloor); }

FeatureVector encode(const ObservedState& s) {
  FeatureVector f{};
  f[0] = s.ns_r / kMaxPopulation;
  f[1] = s.nc_r / kMaxPopulation;
  switch (s.s_neg) {
    case Stage::S1: f[2] = 1.0; break;
    case Stage::S2: f[3] = 1.0; break;
    case Stage::S3: f[4] = 1.0; break;
    case Stage::S4: f[5] = 1.0; break;
    case Stage::S5: break;
  }
  f[6] = normalize_price(s.x_best);
  f[7] = static_cast<double>(s.t_left) / static_cast<double>(std::max<Millis>(1, s.t_end));
  f[8] = normalize_price(s.ip_b);
  f[9] = normalize_price(s.rp_b);
  return f;
}

namespace {

constexpr const char* kPolicyNames[kPolicyActions] = {"counter-offer", "accept", "confirm",
                                                      "reqToReserve", "exit"};

}  // namespace

const char* to_string(PolicyAction a) { return kPolicyNames[static_cast<std::size_t>(a)]; }

std::optional<PolicyAction> parse_policy_action(std::string_view text) {
  for (std::size_t i = 0; i < kPolicyActions; ++i) {
    if (text == kPolicyNames[i]) return static_cast<PolicyAction>(i);
  }
  return std::nullopt;
}

ActionKind to_action_kind(PolicyAction a) {
  switch (a) {
    case PolicyAction::CounterOffer: return ActionKind::Offer;
    case PolicyAction::Accept: return ActionKind::Accept;
    case PolicyAction::Confirm: return ActionKind::Confirm;
    case PolicyAction::ReqToReserve: return ActionKind::ReqToReserve;
    case PolicyAction::Exit: return ActionKind::Exit;
  }
  return ActionKind::Exit;
}

std::optional<PolicyAction> to_policy_action(ActionKind k) {
  switch (k) {
    case ActionKind::Offer: return PolicyAction::CounterOffer;
    case ActionKind::Accept: return PolicyAction::Accept;
    case ActionKind::Confirm: return PolicyAction::Confirm;
    case ActionKind::ReqToReserve: return PolicyAction::ReqToReserve;
    case ActionKind::Exit: return PolicyAction::Exit;
    default: return std::nullopt;
  }
}

std::array<bool, kPolicyActions> legal_policy_mask(const ProtocolState& state) {
  std::array<bool, kPolicyActions> mask{};
  const ActionSet legal = legal_actions(state, Role::Buyer);
  for (std::size_t i = 0; i < kPolicyActions; ++i) {
    mask[i] = legal.contains(to_action_kind(static_cast<PolicyAction>(i)));
  }
  return mask;
}

std::array<bool, kPolicyActions> legal_policy_mask(const FeatureVector& f) {
  Stage stage = Stage::S5;
  if (f[2] > 0.5) stage = Stage::S1;
  else if (f[3] > 0.5) stage = Stage::S2;
  else if (f[4] > 0.5) stage = Stage::S3;
  else if (f[5] > 0.5) stage = Stage::S4;
  if (stage == Stage::S5) {
    std::array<bool, kPolicyActions> none{};
    none[static_cast<std::size_t>(PolicyAction::Exit)] = true;
    return none;
  }
  const Turn turn = stage == Stage::S3 ? Turn::Seller : Turn::Buyer;
  return legal_policy_mask(ProtocolState{stage, turn, Outcome::Open});
}

std::optional<double> DatasetRow::offer_unit() const {
  if (!label_offer) return std::nullopt;
  return (*label_offer - ip_b) / (rp_b - ip_b);
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  CsvWriter out(path, kDatasetHeader);
  std::string line;
  for (const auto& row : data) {
    line.clear();
    for (double v : row.features) {
      line += format_number(v);
      line += ',';
    }
    line += to_string(row.label_action);
    line += ',';
    if (row.label_offer) line += format_number(*row.label_offer);
    out.row(line);
  }
  out.close();
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file " + path.string());
  Dataset data;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != kFeatureDim + 2) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(kFeatureDim + 2) + " fields");
    }
    DatasetRow row;
    for (std::size_t i = 0; i < kFeatureDim; ++i) row.features[i] = std::stod(fields[i]);
    const auto label = parse_policy_action(fields[kFeatureDim]);
    if (!label) throw std::runtime_error("unknown label '" + fields[kFeatureDim] + "'");
    row.label_action = *label;
    if (!fields[kFeatureDim + 1].empty()) row.label_offer = std::stod(fields[kFeatureDim + 1]);
    row.ip_b = denormalize_price(row.features[8]);
    row.rp_b = denormalize_price(row.features[9]);
    data.push_back(row);
  }
  return data;
}

double CorrelationReport::max_off_diagonal() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    for (std::size_t j = 0; j < matrix.size(); ++j) {
      if (i != j) worst = std::max(worst, std::abs(matrix[i][j]));
    }
  }
  return worst;
}

CorrelationReport pearson_matrix(std::span<const std::vector<double>> rows,
                                 std::vector<std::string> names) {
  if (rows.size() < 2) throw std::invalid_argument("pearson_matrix needs at least two rows");
  const std::size_t cols = rows.front().size();
  const double n = static_cast<double>(rows.size());

  std::vector<double> mean(cols, 0.0);
  for (const auto& r : rows) {
    if (r.size() != cols) throw std::invalid_argument("ragged input to pearson_matrix");
    for (std::size_t j = 0; j < cols; ++j) mean[j] += r[j];
  }
  for (auto& m : mean) m /= n;

  std::vector<std::vector<double>> cov(cols, std::vector<double>(cols, 0.0));
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < cols; ++i) {
      const double di = r[i] - mean[i];
      for (std::size_t j = i; j < cols; ++j) cov[i][j] += di * (r[j] - mean[j]);
    }
  }

  CorrelationReport rep;
  rep.names = std::move(names);
  rep.degenerate.assign(cols, false);
  for (std::size_t i = 0; i < cols; ++i) rep.degenerate[i] = !(cov[i][i] > 0.0);
  rep.matrix.assign(cols, std::vector<double>(cols, 0.0));
  for (std::size_t i = 0; i < cols; ++i) {
    rep.matrix[i][i] = 1.0;
    for (std::size_t j = i + 1; j < cols; ++j) {
      double rho = 0.0;
      if (!rep.degenerate[i] && !rep.degenerate[j]) {
        rho = std::clamp(cov[i][j] / std::sqrt(cov[i][i] * cov[j][j]), -1.0, 1.0);
      }
      rep.matrix[i][j] = rep.matrix[j][i] = rho;
    }
  }
  return rep;
}

CorrelationReport attribute_correlation(const Dataset& data) {
  std::vector<std::vector<double>> rows;
  rows.reserve(data.size());
  for (const auto& d : data) {
    const auto& f = d.features;
    const double stage = 1.0 * f[2] + 2.0 * f[3] + 3.0 * f[4] + 4.0 * f[5];
    rows.push_back({f[0], f[1], stage, f[6], f[7], f[8], f[9]});
  }
  return pearson_matrix(rows, {"ns_r", "nc_r", "s_neg", "x_best", "t_left", "ip_b", "rp_b"});
}

void write_correlation_csv(const CorrelationReport& report, const std::filesystem::path& path) {
  std::string header = "feature";
  for (std::size_t j = 0; j < report.matrix.size(); ++j) {
    header += ',';
    header += j < report.names.size() ? report.names[j] : "c" + std::to_string(j);
  }
  CsvWriter out(path, header);
  for (std::size_t i = 0; i < report.matrix.size(); ++i) {
    std::string line = i < report.names.size() ? report.names[i] : "c" + std::to_string(i);
    for (double v : report.matrix[i]) {
      line += ',';
      line += format_number(v);
    }
    out.row(line);
  }
  out.close();
}

}  // namespace negsim

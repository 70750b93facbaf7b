#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cryptorisk/misuse.hpp"
#include "cryptorisk/taxonomy.hpp"

namespace cryptorisk::risk {

/// Exact rational with a positive denominator, kept in lowest terms.
class Fraction {
 public:
  Fraction(std::int64_t num = 0, std::int64_t den = 1);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  /// "n" or "n/d".
  std::string to_string() const;
  /// Accepts "n", "n/d" and exact decimals such as "0.8".
  static Fraction parse(std::string_view text);

  bool operator==(const Fraction&) const = default;
  std::strong_ordering operator<=>(const Fraction& o) const;

 private:
  std::int64_t num_;
  std::int64_t den_;
};

/// 1 iff some tuple with id i was reported by `tool` (t or reporters).
int detectability(const std::vector<MisuseTuple>& tuples, std::string_view tool, int i);

/// Multiplicity of sc in S summed over tuples with id i.
std::int64_t flow_count(const std::vector<MisuseTuple>& tuples, SinkCategory sc, int i);

/// R_x = sum_i w_i * OR_{tool in chain} b_{tool,i} * sum_sc w_sc * n_{sc,i}.
/// Integer weights keep the value exact. DomainError for an empty chain.
std::int64_t risk_value(const std::vector<MisuseTuple>& tuples, const std::set<std::string>& chain,
                        const WeightTable& weights = WeightTable::shipped());

/// Strict-majority acceptance: reporters / capable > threshold. A misuse with
/// no capable detector in the chain is never accepted.
bool accepts(std::size_t reporters, std::size_t capable, const Fraction& threshold = Fraction(1, 2));

struct VoteResult {
  std::vector<MisuseTuple> expected;  // merged, sorted by key
  std::vector<MisuseTuple> rejected;
};

/// Merges all detectors' tuples by (m, id, p, loc) and accepts those reported
/// by more than `threshold` of capable_detectors(id) within the chain. Only
/// reporters that are capable and in the chain are counted.
VoteResult vote(const std::map<std::string, std::vector<MisuseTuple>>& by_detector, const CapabilityMatrix& matrix,
                const std::set<std::string>& chain, const Fraction& threshold = Fraction(1, 2));
/// Chain = the detectors present in by_detector.
VoteResult vote(const std::map<std::string, std::vector<MisuseTuple>>& by_detector, const CapabilityMatrix& matrix);

/// |detected ∩ expected| / |detected| over misuse keys; 1 when nothing was detected.
Fraction chain_precision(const std::vector<MisuseTuple>& detected, const std::vector<MisuseTuple>& expected);

using FlowMatrix = std::array<std::array<std::int64_t, kVulnTypeCount>, kSinkCategoryCount>;  // [sc][id-1]
using DetectFlags = std::array<int, kVulnTypeCount>;                                          // [id-1]

struct AppRiskReport {
  std::string app;
  std::set<std::string> chain;       // detectors gating R_x
  std::set<std::string> vote_chain;  // detectors that voted
  std::map<std::string, DetectFlags> b;  // chain members plus every reporter seen
  FlowMatrix n{};
  std::int64_t risk = 0;

  std::vector<MisuseTuple> expected;
  std::vector<MisuseTuple> rejected;
  std::size_t unmapped = 0;

  bool operator==(const AppRiskReport&) const = default;

  int flag(std::string_view tool, int id) const;
  std::int64_t flows(SinkCategory sc, int id) const { return n[index_of(sc)][id - 1]; }
};

/// b, n and R_x computed from the (deduplicated, annotated) expected tuples.
AppRiskReport build_report(std::string app, std::vector<MisuseTuple> expected, std::vector<MisuseTuple> rejected,
                           const std::set<std::string>& chain, const std::set<std::string>& vote_chain,
                           const WeightTable& weights = WeightTable::shipped());

/// Recomputes R_x from b and n alone.
std::int64_t recompute_risk(const AppRiskReport& report, const WeightTable& weights = WeightTable::shipped());

inline constexpr int kReportVersion = 1;

nlohmann::json to_json(const AppRiskReport& report);
/// Throws ParseError for a malformed document and InvariantError when the
/// stored risk disagrees with b and n under `weights`.
AppRiskReport report_from_json(const nlohmann::json& doc, const WeightTable& weights = WeightTable::shipped());

/// One row per app: app, risk, b for each chain detector (21 each, detectors
/// sorted), then n in canonical category order (21 each).
std::string csv_header(const std::set<std::string>& chain);
std::string csv_row(const AppRiskReport& report);

}  // namespace cryptorisk::risk

#include "cryptorisk/risk.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

#include "cryptorisk/adapters.hpp"
#include "cryptorisk/error.hpp"

namespace cryptorisk::risk {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Fraction

Fraction::Fraction(std::int64_t num, std::int64_t den) {
  if (den == 0) throw DomainError("fraction with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = num / g;
  den_ = den / g;
}

std::string Fraction::to_string() const {
  return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
}

Fraction Fraction::parse(std::string_view text) {
  auto number = [&](std::string_view s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw DomainError("bad fraction '" + std::string(text) + "'");
    return v;
  };
  auto digits_only = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    // Exact decimal: "0.8" -> 4/5.
    std::string_view whole = text.substr(0, dot);
    std::string_view digits = text.substr(dot + 1);
    const bool negative = whole.starts_with('-');
    if (negative) whole.remove_prefix(1);
    if (!digits_only(digits) || digits.size() > 17 || (!whole.empty() && !digits_only(whole))) {
      throw DomainError("bad fraction '" + std::string(text) + "'");
    }
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < digits.size(); ++i) scale *= 10;
    const std::int64_t value = (whole.empty() ? 0 : number(whole)) * scale + number(digits);
    return Fraction(negative ? -value : value, scale);
  }
  auto slash = text.find('/');
  if (slash == std::string_view::npos) return Fraction(number(text));
  return Fraction(number(text.substr(0, slash)), number(text.substr(slash + 1)));
}

std::strong_ordering Fraction::operator<=>(const Fraction& o) const {
  return static_cast<__int128>(num_) * o.den_ <=> static_cast<__int128>(o.num_) * den_;
}

// ---------------------------------------------------------------------------
// Formula pieces

namespace {

bool reported_by(const MisuseTuple& t, std::string_view tool) {
  return t.t == tool || t.reporters.contains(std::string(tool));
}

}  // namespace

int detectability(const std::vector<MisuseTuple>& tuples, std::string_view tool, int i) {
  require_vuln_id(i);
  return std::any_of(tuples.begin(), tuples.end(), [&](const MisuseTuple& t) { return t.id == i && reported_by(t, tool); })
             ? 1
             : 0;
}

std::int64_t flow_count(const std::vector<MisuseTuple>& tuples, SinkCategory sc, int i) {
  require_vuln_id(i);
  std::int64_t n = 0;
  for (const auto& t : tuples) {
    if (t.id == i) n += std::count(t.S.begin(), t.S.end(), sc);
  }
  return n;
}

std::int64_t risk_value(const std::vector<MisuseTuple>& tuples, const std::set<std::string>& chain,
                        const WeightTable& weights) {
  if (chain.empty()) throw DomainError("risk chain must not be empty");
  std::int64_t total = 0;
  for (int i = 1; i <= kVulnTypeCount; ++i) {
    const bool detectable =
        std::any_of(chain.begin(), chain.end(), [&](const std::string& tool) { return detectability(tuples, tool, i); });
    if (!detectable) continue;
    std::int64_t weighted = 0;
    for (SinkCategory sc : kSinkCategories) weighted += weights.sink_weight(sc) * flow_count(tuples, sc, i);
    total += weights.severity_of(i) * weighted;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Voting

bool accepts(std::size_t reporters, std::size_t capable, const Fraction& threshold) {
  if (capable == 0) return false;
  return Fraction(static_cast<std::int64_t>(reporters), static_cast<std::int64_t>(capable)) > threshold;
}

VoteResult vote(const std::map<std::string, std::vector<MisuseTuple>>& by_detector, const CapabilityMatrix& matrix,
                const std::set<std::string>& chain, const Fraction& threshold) {
  std::vector<MisuseTuple> all;
  for (const auto& [detector, tuples] : by_detector) {
    for (auto t : tuples) {
      t.reporters.insert(detector);
      all.push_back(std::move(t));
    }
  }
  VoteResult out;
  for (auto& t : adapters::merge_and_dedup(std::move(all))) {
    const auto capable = matrix.capable_detectors(t.id, chain);
    const auto agreeing = std::count_if(t.reporters.begin(), t.reporters.end(),
                                        [&](const std::string& r) { return capable.contains(r); });
    (accepts(static_cast<std::size_t>(agreeing), capable.size(), threshold) ? out.expected : out.rejected)
        .push_back(std::move(t));
  }
  return out;
}

VoteResult vote(const std::map<std::string, std::vector<MisuseTuple>>& by_detector, const CapabilityMatrix& matrix) {
  std::set<std::string> chain;
  for (const auto& [detector, tuples] : by_detector) chain.insert(detector);
  return vote(by_detector, matrix, chain);
}

Fraction chain_precision(const std::vector<MisuseTuple>& detected, const std::vector<MisuseTuple>& expected) {
  std::set<MisuseKey> d, e;
  for (const auto& t : detected) d.insert(key_of(t));
  for (const auto& t : expected) e.insert(key_of(t));
  if (d.empty()) return Fraction(1);
  const auto hits = std::count_if(d.begin(), d.end(), [&](const MisuseKey& k) { return e.contains(k); });
  return Fraction(hits, static_cast<std::int64_t>(d.size()));
}

// ---------------------------------------------------------------------------
// Reports

int AppRiskReport::flag(std::string_view tool, int id) const {
  auto it = b.find(std::string(tool));
  return it == b.end() ? 0 : it->second[id - 1];
}

AppRiskReport build_report(std::string app, std::vector<MisuseTuple> expected, std::vector<MisuseTuple> rejected,
                           const std::set<std::string>& chain, const std::set<std::string>& vote_chain,
                           const WeightTable& weights) {
  AppRiskReport r;
  r.app = std::move(app);
  r.chain = chain;
  r.vote_chain = vote_chain;
  std::set<std::string> tools = chain;
  for (const auto& t : expected) tools.insert(t.reporters.begin(), t.reporters.end());
  for (const auto& tool : tools) {
    DetectFlags flags{};
    for (int i = 1; i <= kVulnTypeCount; ++i) flags[i - 1] = detectability(expected, tool, i);
    r.b.emplace(tool, flags);
  }
  for (SinkCategory sc : kSinkCategories) {
    for (int i = 1; i <= kVulnTypeCount; ++i) r.n[index_of(sc)][i - 1] = flow_count(expected, sc, i);
  }
  r.risk = risk_value(expected, chain, weights);
  r.expected = std::move(expected);
  r.rejected = std::move(rejected);
  return r;
}

std::int64_t recompute_risk(const AppRiskReport& report, const WeightTable& weights) {
  std::int64_t total = 0;
  for (int i = 1; i <= kVulnTypeCount; ++i) {
    const bool detectable = std::any_of(report.chain.begin(), report.chain.end(),
                                        [&](const std::string& tool) { return report.flag(tool, i) == 1; });
    if (!detectable) continue;
    std::int64_t weighted = 0;
    for (SinkCategory sc : kSinkCategories) weighted += weights.sink_weight(sc) * report.flows(sc, i);
    total += weights.severity_of(i) * weighted;
  }
  return total;
}

json to_json(const AppRiskReport& r) {
  json b = json::object();
  for (const auto& [tool, flags] : r.b) b[tool] = flags;
  json n = json::object();
  for (SinkCategory sc : kSinkCategories) n[std::string(to_string(sc))] = r.n[index_of(sc)];
  json expected = json::array();
  for (const auto& t : r.expected) expected.push_back(to_json(t));
  json rejected = json::array();
  for (const auto& t : r.rejected) rejected.push_back(to_json(t));
  return {{"report_version", kReportVersion},
          {"app", r.app},
          {"chain", r.chain},
          {"vote_chain", r.vote_chain},
          {"risk", r.risk},
          {"b", b},
          {"n", n},
          {"expected", expected},
          {"rejected", rejected},
          {"unmapped", r.unmapped}};
}

AppRiskReport report_from_json(const json& doc, const WeightTable& weights) {
  AppRiskReport r;
  try {
    if (doc.at("report_version").get<int>() != kReportVersion) {
      throw ParseError({"unsupported report_version " + doc.at("report_version").dump()});
    }
    r.app = doc.at("app").get<std::string>();
    r.chain = doc.at("chain").get<std::set<std::string>>();
    r.vote_chain = doc.value("vote_chain", std::set<std::string>{});
    r.risk = doc.at("risk").get<std::int64_t>();
    for (const auto& [tool, flags] : doc.at("b").items()) {
      auto v = flags.get<std::vector<int>>();
      if (v.size() != kVulnTypeCount) throw ParseError({"b[" + tool + "] must have 21 entries"});
      DetectFlags f{};
      std::copy(v.begin(), v.end(), f.begin());
      r.b.emplace(tool, f);
    }
    for (const auto& [name, counts] : doc.at("n").items()) {
      auto v = counts.get<std::vector<std::int64_t>>();
      if (v.size() != kVulnTypeCount) throw ParseError({"n[" + name + "] must have 21 entries"});
      std::copy(v.begin(), v.end(), r.n[index_of(parse_sink_category(name))].begin());
    }
    for (const auto& t : doc.value("expected", json::array())) r.expected.push_back(misuse_from_json(t));
    for (const auto& t : doc.value("rejected", json::array())) r.rejected.push_back(misuse_from_json(t));
    r.unmapped = doc.value("unmapped", std::size_t{0});
  } catch (const json::exception& e) {
    throw ParseError({std::string("malformed risk report: ") + e.what()});
  } catch (const DomainError& e) {
    throw ParseError({std::string("malformed risk report: ") + e.what()});
  }
  if (recompute_risk(r, weights) != r.risk) {
    throw InvariantError("report for '" + r.app + "' stores risk " + std::to_string(r.risk) +
                         " but b and n give " + std::to_string(recompute_risk(r, weights)));
  }
  return r;
}

std::string csv_header(const std::set<std::string>& chain) {
  std::string out = "app,risk";
  for (const auto& tool : chain) {
    for (int i = 1; i <= kVulnTypeCount; ++i) out += ",b_" + tool + "_" + std::to_string(i);
  }
  for (SinkCategory sc : kSinkCategories) {
    for (int i = 1; i <= kVulnTypeCount; ++i) out += ",n_" + std::string(to_string(sc)) + "_" + std::to_string(i);
  }
  return out;
}

std::string csv_row(const AppRiskReport& r) {
  std::string out = r.app + "," + std::to_string(r.risk);
  for (const auto& tool : r.chain) {
    for (int i = 1; i <= kVulnTypeCount; ++i) out += "," + std::to_string(r.flag(tool, i));
  }
  for (SinkCategory sc : kSinkCategories) {
    for (int i = 1; i <= kVulnTypeCount; ++i) out += "," + std::to_string(r.flows(sc, i));
  }
  return out;
}

}  // namespace cryptorisk::risk

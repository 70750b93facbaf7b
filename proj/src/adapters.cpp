#include "cryptorisk/adapters.hpp"

#include <algorithm>
#include <tuple>

#include "cryptorisk/detector.hpp"
#include "cryptorisk/error.hpp"

namespace cryptorisk::adapters {

using nlohmann::json;

json to_json(const UnmappedFinding& f) {
  return {{"detector", f.detector}, {"err", f.err},
          {"api", f.api},           {"method", f.method},
          {"description", f.description}, {"loc", appir::to_json(f.loc)},
          {"unmapped", true}};
}

bool has_parser(std::string_view detector, const Taxonomy& taxonomy) {
  if (detector == detector::kDetectorId) return true;
  return std::any_of(taxonomy.mappings.begin(), taxonomy.mappings.end(),
                     [&](const MappingRule& r) { return r.detector == detector; });
}

namespace {

std::string text_field(const json& f, const char* key, std::vector<std::string>& errors, const std::string& at) {
  if (!f.contains(key)) return {};
  if (!f[key].is_string()) {
    errors.push_back(at + ": '" + key + "' must be a string");
    return {};
  }
  return f[key].get<std::string>();
}

ParsedReport parse_external(const std::string& detector, const json& doc, const Taxonomy& taxonomy) {
  std::vector<std::string> errors;
  if (!doc.is_object()) throw ParseError({"report must be a JSON object"});
  if (doc.contains("detector") && doc["detector"] != detector) {
    errors.push_back("report is for detector " + doc["detector"].dump() + ", expected \"" + detector + "\"");
  }
  if (!doc.contains("findings") || !doc["findings"].is_array()) {
    errors.push_back("missing 'findings' array");
    throw ParseError(std::move(errors));
  }

  ParsedReport out;
  out.detector = detector;
  std::size_t n = 0;
  for (const auto& f : doc["findings"]) {
    const std::string at = "finding " + std::to_string(n++);
    if (!f.is_object()) {
      errors.push_back(at + ": not an object");
      continue;
    }
    const std::size_t before = errors.size();
    std::string err = f.contains("rule") ? text_field(f, "rule", errors, at) : text_field(f, "error", errors, at);
    std::string api = text_field(f, "api", errors, at);
    std::string method = text_field(f, "method", errors, at);
    std::string description = text_field(f, "description", errors, at);
    if (api.empty()) errors.push_back(at + ": missing 'api'");
    if (method.empty()) errors.push_back(at + ": missing 'method'");
    appir::Loc loc{method, -1};
    if (f.contains("location")) {
      const json& l = f["location"];
      if (!l.is_object()) {
        errors.push_back(at + ": 'location' must be an object");
      } else {
        if (l.contains("method")) loc.method = text_field(l, "method", errors, at);
        if (l.contains("stmt")) {
          if (l["stmt"].is_number_integer()) {
            loc.stmt = l["stmt"].get<int>();
          } else {
            errors.push_back(at + ": 'location.stmt' must be an integer");
          }
        }
      }
    }
    if (errors.size() != before) continue;

    if (auto id = taxonomy.map_finding(detector, err, api, description)) {
      MisuseTuple t;
      t.m = api;
      t.id = *id;
      t.p = method;
      t.d = description;
      t.t = detector;
      t.loc = loc;
      t.reporters = {detector};
      out.tuples.push_back(std::move(t));
    } else {
      out.unmapped.push_back({detector, err, api, method, description, loc});
    }
  }
  if (!errors.empty()) throw ParseError(std::move(errors));
  return out;
}

void require_registered(std::string_view detector, const Taxonomy& taxonomy) {
  if (!taxonomy.capabilities.has_detector(detector)) {
    throw DomainError("detector '" + std::string(detector) + "' is not registered");
  }
}

}  // namespace

ParsedReport parse_report(std::string_view detector, const json& doc, const Taxonomy& taxonomy) {
  require_registered(detector, taxonomy);
  if (detector == detector::kDetectorId) {
    if (!doc.is_array()) throw ParseError({"BI report must be an array of misuse tuples"});
    ParsedReport out;
    out.detector = std::string(detector);
    std::vector<std::string> errors;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      try {
        out.tuples.push_back(misuse_from_json(doc[i]));
      } catch (const ParseError& e) {
        for (const auto& v : e.violations()) errors.push_back("tuple " + std::to_string(i) + ": " + v);
      } catch (const DomainError& e) {
        errors.push_back("tuple " + std::to_string(i) + ": " + e.what());
      }
    }
    if (!errors.empty()) throw ParseError(std::move(errors));
    return out;
  }
  return parse_external(std::string(detector), doc, taxonomy);
}

ParsedReport parse_report_text(std::string_view detector, std::string_view text, const Taxonomy& taxonomy,
                               const std::string& source) {
  require_registered(detector, taxonomy);
  if (detector == detector::kDetectorId) {
    ParsedReport out;
    out.detector = std::string(detector);
    out.tuples = misuses_from_jsonl(text, source);
    return out;
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, {std::string("malformed JSON: ") + e.what()});
  }
  try {
    return parse_report(detector, doc, taxonomy);
  } catch (const ParseError& e) {
    throw ParseError(source, e.violations());
  }
}

ChainCheck validate_chain(const std::set<std::string>& detectors, const Taxonomy& taxonomy) {
  ChainCheck check;
  std::set<int> covered;
  for (const auto& d : detectors) {
    if (!taxonomy.capabilities.has_detector(d)) {
      check.unknown.insert(d);
      continue;
    }
    const auto& caps = taxonomy.capabilities.capabilities(d);
    covered.insert(caps.begin(), caps.end());
    if (!has_parser(d, taxonomy)) check.without_parser.insert(d);
  }
  for (int id = 1; id <= kVulnTypeCount; ++id) {
    if (!covered.contains(id)) check.missing_ids.insert(id);
  }
  return check;
}

std::vector<MisuseTuple> merge_and_dedup(std::vector<MisuseTuple> tuples) {
  auto order = [](const MisuseTuple& a, const MisuseTuple& b) {
    auto ka = key_of(a), kb = key_of(b);
    return std::tie(ka, a.t, a.d, a.S, a.reporters, a.locatable) <
           std::tie(kb, b.t, b.d, b.S, b.reporters, b.locatable);
  };
  std::sort(tuples.begin(), tuples.end(), order);
  std::vector<MisuseTuple> out;
  for (auto& t : tuples) {
    t.reporters.insert(t.t);
    if (!out.empty() && key_of(out.back()) == key_of(t)) {
      out.back().reporters.insert(t.reporters.begin(), t.reporters.end());
      out.back().t = *out.back().reporters.begin();
    } else {
      t.t = *t.reporters.begin();
      out.push_back(std::move(t));
    }
  }
  return out;
}

}  // namespace cryptorisk::adapters

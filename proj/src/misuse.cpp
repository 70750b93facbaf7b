#include "cryptorisk/misuse.hpp"

#include "cryptorisk/error.hpp"

namespace cryptorisk {

using nlohmann::json;

MisuseKey key_of(const MisuseTuple& t) { return {t.m, t.id, t.p, t.loc}; }

json to_json(const MisuseTuple& t) {
  json s = json::array();
  for (SinkCategory sc : t.S) s.push_back(std::string(to_string(sc)));
  json j{{"m", t.m},  {"id", t.id}, {"p", t.p},
         {"d", t.d},  {"t", t.t},   {"S", s},
         {"loc", appir::to_json(t.loc)}, {"reporters", t.reporters}};
  if (!t.locatable) j["locatable"] = false;
  return j;
}

MisuseTuple misuse_from_json(const json& j) {
  if (!j.is_object()) throw ParseError({"misuse tuple must be a JSON object"});
  std::vector<std::string> missing;
  for (const char* key : {"m", "id", "p", "t", "loc"}) {
    if (!j.contains(key)) missing.push_back(std::string("missing field '") + key + "'");
  }
  if (!missing.empty()) throw ParseError(std::move(missing));
  MisuseTuple t;
  try {
    t.m = j.at("m").get<std::string>();
    t.id = j.at("id").get<int>();
    t.p = j.at("p").get<std::string>();
    t.d = j.value("d", std::string{});
    t.t = j.at("t").get<std::string>();
    for (const auto& s : j.value("S", json::array())) t.S.push_back(parse_sink_category(s.get<std::string>()));
    t.loc = appir::loc_from_json(j.at("loc"));
    t.reporters = j.value("reporters", std::set<std::string>{});
    t.locatable = j.value("locatable", true);
  } catch (const json::exception& e) {
    throw ParseError({std::string("malformed misuse tuple: ") + e.what()});
  }
  require_vuln_id(t.id);
  t.reporters.insert(t.t);
  return t;
}

std::string to_jsonl(const std::vector<MisuseTuple>& tuples) {
  std::string out;
  for (const auto& t : tuples) {
    out += to_json(t).dump();
    out += '\n';
  }
  return out;
}

std::vector<MisuseTuple> misuses_from_jsonl(std::string_view text, const std::string& source) {
  std::vector<MisuseTuple> out;
  std::vector<std::string> errors;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(misuse_from_json(json::parse(line)));
    } catch (const ParseError& e) {
      for (const auto& v : e.violations()) errors.push_back("line " + std::to_string(line_no) + ": " + v);
    } catch (const json::exception& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DomainError& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!errors.empty()) throw ParseError(source, std::move(errors));
  return out;
}

}  // namespace cryptorisk

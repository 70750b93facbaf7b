#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "cryptorisk/appir.hpp"

namespace testsupport {

/// Single-class program "a.A" with one static method "a.A.f(java.lang.String)"
/// (parameter "arg"). Locals are given as {name: type}; every call target
/// becomes an external.
inline nlohmann::json single_method(const std::map<std::string, std::string>& locals, nlohmann::json body) {
  using nlohmann::json;
  std::set<std::string> externals;
  for (const auto& s : body) {
    if (s["op"] == "call") externals.insert(s["callee"].get<std::string>());
  }
  json ls = json::array();
  for (const auto& [name, type] : locals) ls.push_back({{"name", name}, {"type", type}});
  return {{"ceir_version", 1},
          {"app", "single"},
          {"classes",
           {{{"name", "a.A"}, {"super", "java.lang.Object"}, {"interfaces", json::array()},
             {"fields", json::array()},
             {"methods",
              {{{"signature", "a.A.f(java.lang.String)"}, {"static", true},
                {"params", {{{"name", "arg"}, {"type", "java.lang.String"}}}}, {"locals", ls},
                {"body", body}}}}}}},
          {"externals", externals},
          {"entry_methods", {"a.A.f(java.lang.String)"}}};
}

/// Statement helpers. Ids are assigned by position in `single_method` callers.
inline nlohmann::json cst(int id, const std::string& dst, nlohmann::json value, const std::string& type) {
  return {{"id", id}, {"op", "const"}, {"dst", dst}, {"value", std::move(value)}, {"type", type}};
}
inline nlohmann::json call(int id, const std::string& dst, const std::string& callee, const std::string& receiver,
                           std::vector<std::string> args) {
  nlohmann::json s{{"id", id}, {"op", "call"}, {"callee", callee}, {"args", args}};
  if (!dst.empty()) s["dst"] = dst;
  if (!receiver.empty()) s["receiver"] = receiver;
  return s;
}
inline nlohmann::json ret(int id) { return {{"id", id}, {"op", "return"}}; }

}  // namespace testsupport

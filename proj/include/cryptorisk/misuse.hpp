#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cryptorisk/appir.hpp"
#include "cryptorisk/taxonomy.hpp"

namespace cryptorisk {

/// The unified misuse record <m, id, p, d, t, S>, plus the call-site location
/// and the set of detectors that reported it after merging.
struct MisuseTuple {
  std::string m;                   // misused API signature
  int id = 0;                      // vulnerability type 1..21
  std::string p;                   // parent method signature
  std::string d;                   // reason and actual parameters
  std::string t;                   // detector id
  std::vector<SinkCategory> S;     // one entry per reached sink call site
  appir::Loc loc;                  // stmt -1 when the detector gave none
  std::set<std::string> reporters; // always contains t
  bool locatable = true;           // false when p has no call site of m

  bool operator==(const MisuseTuple&) const = default;
};

/// Identity used for merging and voting: (m, id, p, loc).
struct MisuseKey {
  std::string m;
  int id;
  std::string p;
  appir::Loc loc;

  auto operator<=>(const MisuseKey&) const = default;
};

MisuseKey key_of(const MisuseTuple& t);

nlohmann::json to_json(const MisuseTuple& t);
/// Throws ParseError on missing fields, DomainError on invalid values.
MisuseTuple misuse_from_json(const nlohmann::json& j);

/// One compact JSON object per line, trailing newline after each.
std::string to_jsonl(const std::vector<MisuseTuple>& tuples);
/// Blank lines are skipped; errors name the offending line number.
std::vector<MisuseTuple> misuses_from_jsonl(std::string_view text, const std::string& source = "");

}  // namespace cryptorisk

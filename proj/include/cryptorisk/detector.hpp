#pragma once

#include <string_view>
#include <vector>

#include "cryptorisk/appir.hpp"
#include "cryptorisk/misuse.hpp"

namespace cryptorisk::detector {

inline constexpr std::string_view kDetectorId = "BI";

struct RuleInfo {
  int vuln_id;
  std::string_view check;  // one-line statement of what is matched
};

/// One entry per vulnerability type, ordered by id.
const std::vector<RuleInfo>& rules();

/// Runs every rule over the program. Output is sorted by (method rank,
/// statement position, id) and contains at most one tuple per (m, id, p, loc).
/// S is empty and t = "BI" for every tuple.
///
/// Known imprecision: constants are intra-procedural, so a key built in one
/// method and used in another is NonConstant (and may surface as id 21); the
/// typestate and escape checks for 18/20 alias only through plain copies.
std::vector<MisuseTuple> detect(const appir::Program& program);

}  // namespace cryptorisk::detector

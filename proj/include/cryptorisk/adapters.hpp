#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cryptorisk/misuse.hpp"
#include "cryptorisk/taxonomy.hpp"

namespace cryptorisk::adapters {

/// A finding no mapping rule accepted. Kept verbatim so reports can list it.
struct UnmappedFinding {
  std::string detector;
  std::string err;
  std::string api;
  std::string method;
  std::string description;
  appir::Loc loc;

  bool operator==(const UnmappedFinding&) const = default;
};

nlohmann::json to_json(const UnmappedFinding& f);

struct ParsedReport {
  std::string detector;
  std::vector<MisuseTuple> tuples;
  std::vector<UnmappedFinding> unmapped;
};

/// External report document:
///   {"detector": "CG", "findings": [{"rule"|"error": tag, "api": sig,
///     "method": parent, "description": text, "location": {"method", "stmt"}}]}
/// "BI" instead takes an array of misuse tuples. Every finding ends up in
/// exactly one of tuples / unmapped.
/// Throws DomainError for an unregistered detector, ParseError for a
/// malformed document or a detector field that disagrees with `detector`.
ParsedReport parse_report(std::string_view detector, const nlohmann::json& doc, const Taxonomy& taxonomy);
/// Text form; "BI" is read as misuse-tuple JSONL.
ParsedReport parse_report_text(std::string_view detector, std::string_view text, const Taxonomy& taxonomy,
                               const std::string& source = "");

/// True for "BI" and for any detector with at least one mapping rule.
bool has_parser(std::string_view detector, const Taxonomy& taxonomy);

struct ChainCheck {
  std::set<int> missing_ids;            // ids no detector in the chain covers
  std::set<std::string> unknown;        // not registered in the capability matrix
  std::set<std::string> without_parser;

  bool valid() const { return missing_ids.empty() && unknown.empty() && without_parser.empty(); }
};

/// A chain is valid when its capabilities jointly cover ids 1..21 and every
/// member can be parsed.
ChainCheck validate_chain(const std::set<std::string>& detectors, const Taxonomy& taxonomy);

/// Collapses tuples sharing (m, id, p, loc) into one record whose reporters
/// are the union of the inputs'. t is the smallest reporter and d, S come from
/// that reporter's tuple. Output is sorted by key; the result does not depend
/// on input order.
std::vector<MisuseTuple> merge_and_dedup(std::vector<MisuseTuple> tuples);

}  // namespace cryptorisk::adapters

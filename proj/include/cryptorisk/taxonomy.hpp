#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cryptorisk {

inline constexpr int kVulnTypeCount = 21;
inline constexpr int kSinkCategoryCount = 9;

/// Leakage channel of a sink. Declaration order is the canonical column order
/// used by flow matrices and feature vectors.
enum class SinkCategory : std::uint8_t {
  File,
  Log,
  Network,
  SmsMms,
  Sync,
  NcStorage,
  NcIcc,
  NcOutStream,
  NcOther,
};

inline constexpr std::array<SinkCategory, kSinkCategoryCount> kSinkCategories{
    SinkCategory::File,      SinkCategory::Log,   SinkCategory::Network,
    SinkCategory::SmsMms,    SinkCategory::Sync,  SinkCategory::NcStorage,
    SinkCategory::NcIcc,     SinkCategory::NcOutStream, SinkCategory::NcOther};

constexpr std::size_t index_of(SinkCategory sc) { return static_cast<std::size_t>(sc); }

std::string_view to_string(SinkCategory sc);
std::optional<SinkCategory> try_parse_sink_category(std::string_view name);
/// Throws DomainError for names outside the nine categories.
SinkCategory parse_sink_category(std::string_view name);

struct VulnType {
  int id;
  std::string_view description;
  int severity_weight;
};

/// The 21 vulnerability types, indexed by id - 1.
const std::array<VulnType, kVulnTypeCount>& vuln_types();

bool is_valid_vuln_id(int id);
/// Throws DomainError unless 1 <= id <= 21.
void require_vuln_id(int id);

/// Shipped severity weight w_id: 10 (high), 7 (medium), 4 (low), 1 (very low).
int severity_weight(int id);
/// Shipped risk weight w_sc.
int risk_weight(SinkCategory sc);
int risk_weight(std::string_view category_name);

/// Severity and sink weights in effect for a run. Defaults are the shipped
/// tables; a configuration file may override individual entries.
struct WeightTable {
  std::array<int, kVulnTypeCount> severity{};
  std::array<int, kSinkCategoryCount> sink{};

  static WeightTable shipped();

  int severity_of(int id) const;
  int sink_weight(SinkCategory sc) const { return sink[index_of(sc)]; }

  /// The category with the largest weight; equal weights resolve to the
  /// lexicographically smallest category name. Empty input is a DomainError.
  SinkCategory most_sensitive(std::span<const SinkCategory> candidates) const;
};

enum class ApiKind { Dapi, Papi, Unknown };

std::string_view to_string(ApiKind kind);

struct ApiCatalogEntry {
  std::string signature;
  ApiKind kind = ApiKind::Unknown;  // Unknown for sink-only entries
  std::optional<SinkCategory> default_sink_category;
  bool taints_receiver = false;  // void parameter-setting call: the receiver carries the result

  bool is_sink() const { return default_sink_category.has_value(); }
};

class ApiCatalog {
 public:
  /// Rejects duplicate signatures.
  void add(ApiCatalogEntry entry);

  const ApiCatalogEntry* find(std::string_view signature) const;
  ApiKind classify(std::string_view signature) const;

  std::set<std::string> signatures_of(ApiKind kind) const;
  std::set<std::string> sink_signatures() const;
  std::set<std::string> receiver_tainting() const;

  void tag_type(std::string type_name, SinkCategory sc);
  std::optional<SinkCategory> type_tag(std::string_view type_name) const;
  const std::map<std::string, SinkCategory, std::less<>>& type_tags() const { return type_tags_; }

  const std::map<std::string, ApiCatalogEntry, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, ApiCatalogEntry, std::less<>> entries_;
  std::map<std::string, SinkCategory, std::less<>> type_tags_;
};

/// Detector id -> vulnerability ids it can detect, queryable both ways.
class CapabilityMatrix {
 public:
  void register_detector(const std::string& detector, std::set<int> vuln_ids);

  bool has_detector(std::string_view detector) const;
  const std::set<int>& capabilities(std::string_view detector) const;
  std::set<std::string> detectors() const;

  /// Detectors whose capability set contains id.
  std::set<std::string> capable_detectors(int id) const;
  /// Same, restricted to the given chain.
  std::set<std::string> capable_detectors(int id, const std::set<std::string>& chain) const;

 private:
  std::map<std::string, std::set<int>, std::less<>> matrix_;
};

/// One row of the external-finding -> vulnerability id table. A rule matches
/// when the detector and error tag agree, the API signature contains one of
/// api_contains (if any), and the description contains one of desc_keywords
/// (if any, case-insensitive). Rules are tried in table order.
struct MappingRule {
  std::string detector;
  std::string err;
  std::vector<std::string> api_contains;
  std::vector<std::string> desc_keywords;
  int vuln_id = 0;

  bool matches(std::string_view det, std::string_view err_tag, std::string_view api,
               std::string_view description) const;
};

/// Everything configurable about the taxonomy: weights, API catalog,
/// detector capabilities and the external mapping table. Immutable once
/// built; share freely across threads.
class Taxonomy {
 public:
  static const Taxonomy& defaults();

  /// Builds from a catalog document. Sections absent from the document keep
  /// the values of `base`.
  static Taxonomy from_json(const nlohmann::json& doc, const Taxonomy& base);
  static Taxonomy from_json(const nlohmann::json& doc);
  static Taxonomy load(const std::string& path);

  nlohmann::json to_json() const;

  int severity_weight(int id) const { return weights.severity_of(id); }
  int risk_weight(SinkCategory sc) const { return weights.sink_weight(sc); }
  ApiKind classify_api(std::string_view signature) const { return catalog.classify(signature); }
  std::set<std::string> capable_detectors(int id) const;

  /// First matching mapping rule's vuln id, or nullopt.
  std::optional<int> map_finding(std::string_view detector, std::string_view err,
                                 std::string_view api, std::string_view description) const;

  WeightTable weights = WeightTable::shipped();
  ApiCatalog catalog;
  CapabilityMatrix capabilities;
  std::vector<MappingRule> mappings;
};

}  // namespace cryptorisk

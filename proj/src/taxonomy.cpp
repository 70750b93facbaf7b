#include "cryptorisk/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "cryptorisk/error.hpp"

namespace cryptorisk {

namespace detail {
extern const std::string_view kDefaultCatalogJson;
}

using nlohmann::json;

ParseError::ParseError(std::vector<std::string> violations)
    : ParseError(std::string{}, std::move(violations)) {}

ParseError::ParseError(const std::string& source, std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string msg = source.empty() ? "parse error" : source + ": parse error";
        for (const auto& v : violations) msg += "\n  " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

namespace {

constexpr std::array<std::string_view, kSinkCategoryCount> kSinkNames{
    "FILE", "LOG", "NETWORK", "SMS_MMS", "SYNC", "NC_STORAGE", "NC_ICC", "NC_OUT_STREAM", "NC_OTHER"};

constexpr std::array<int, kSinkCategoryCount> kSinkWeights{5, 3, 10, 1, 4, 4, 7, 5, 1};

constexpr int kHigh = 10;
constexpr int kMedium = 7;
constexpr int kLow = 4;
constexpr int kVeryLow = 1;

constexpr std::array<VulnType, kVulnTypeCount> kVulnTypes{{
    {1, "Predictable/constant cryptographic keys", kHigh},
    {2, "Predictable/constant passwords for PBE", kHigh},
    {3, "Predictable/constant passwords for KeyStore", kHigh},
    {4, "Custom Hostname verifiers to accept all hosts", kHigh},
    {5, "Custom TrustManager to trust all certificates", kHigh},
    {6, "Custom SSLSocketFactory w/o manual Hostname verification", kHigh},
    {7, "Occasional use of HTTP", kHigh},
    {8, "Usage of expired protocol by SSLContext", kHigh},
    {9, "Predictable/constant PRNG seeds", kMedium},
    {10, "Cryptographically insecure PRNGs (e.g., java.util.Random)", kMedium},
    {11, "Static Salts in PBE", kMedium},
    {12, "ECB mode in symmetric ciphers", kMedium},
    {13, "Static IVs in CBC mode symmetric ciphers", kMedium},
    {14, "Fewer than 1,000 iterations for PBE", kLow},
    {15, "64-bit block ciphers (e.g., DES, IDEA, Blowfish, RC4, RC2)", kLow},
    {16, "Insecure asymmetric ciphers (e.g, RSA, ECC)", kLow},
    {17, "Insecure cryptographic hash (e.g., SHA1, MD5, MD4, MD2)", kHigh},
    {18, "Incorrect sequence of cryptographic API calls", kLow},
    {19, "Usage of forbidden APIs", kMedium},
    {20, "Incomplete usage of cryptographic API", kVeryLow},
    {21, "Suspected usage needs further testing", kVeryLow},
}};

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Case-insensitive search for `needle` starting at a word boundary of `hay`.
bool contains_word_prefix(std::string_view hay, std::string_view needle) {
  if (needle.empty()) return true;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (i > 0 && is_word_char(hay[i - 1]) && is_word_char(needle.front())) continue;
    bool ok = true;
    for (std::size_t j = 0; j < needle.size() && ok; ++j) ok = lower(hay[i + j]) == lower(needle[j]);
    if (ok) return true;
  }
  return false;
}

ApiKind parse_kind(const std::string& s) {
  if (s == "DAPI") return ApiKind::Dapi;
  if (s == "PAPI") return ApiKind::Papi;
  throw DomainError("unknown API kind '" + s + "' (expected DAPI or PAPI)");
}

}  // namespace

std::string_view to_string(SinkCategory sc) { return kSinkNames.at(index_of(sc)); }

std::optional<SinkCategory> try_parse_sink_category(std::string_view name) {
  for (std::size_t i = 0; i < kSinkNames.size(); ++i) {
    if (kSinkNames[i] == name) return kSinkCategories[i];
  }
  return std::nullopt;
}

SinkCategory parse_sink_category(std::string_view name) {
  if (auto sc = try_parse_sink_category(name)) return *sc;
  throw DomainError("unknown sink category '" + std::string(name) + "'");
}

const std::array<VulnType, kVulnTypeCount>& vuln_types() { return kVulnTypes; }

bool is_valid_vuln_id(int id) { return id >= 1 && id <= kVulnTypeCount; }

void require_vuln_id(int id) {
  if (!is_valid_vuln_id(id)) {
    throw DomainError("vulnerability id " + std::to_string(id) + " outside 1..21");
  }
}

int severity_weight(int id) {
  require_vuln_id(id);
  return kVulnTypes[static_cast<std::size_t>(id - 1)].severity_weight;
}

int risk_weight(SinkCategory sc) { return kSinkWeights.at(index_of(sc)); }

int risk_weight(std::string_view category_name) { return risk_weight(parse_sink_category(category_name)); }

WeightTable WeightTable::shipped() {
  WeightTable t;
  for (const auto& v : kVulnTypes) t.severity[static_cast<std::size_t>(v.id - 1)] = v.severity_weight;
  t.sink = kSinkWeights;
  return t;
}

int WeightTable::severity_of(int id) const {
  require_vuln_id(id);
  return severity[static_cast<std::size_t>(id - 1)];
}

SinkCategory WeightTable::most_sensitive(std::span<const SinkCategory> candidates) const {
  if (candidates.empty()) throw DomainError("most_sensitive: no candidate categories");
  SinkCategory best = candidates.front();
  for (SinkCategory sc : candidates.subspan(1)) {
    const int w = sink_weight(sc);
    const int bw = sink_weight(best);
    if (w > bw || (w == bw && to_string(sc) < to_string(best))) best = sc;
  }
  return best;
}

std::string_view to_string(ApiKind kind) {
  switch (kind) {
    case ApiKind::Dapi: return "DAPI";
    case ApiKind::Papi: return "PAPI";
    case ApiKind::Unknown: return "Unknown";
  }
  return "Unknown";
}

void ApiCatalog::add(ApiCatalogEntry entry) {
  const std::string sig = entry.signature;
  auto [it, inserted] = entries_.try_emplace(sig, std::move(entry));
  if (!inserted) {
    // The same signature may appear once as a crypto API and once as a sink;
    // fold the two declarations into a single entry.
    ApiCatalogEntry& existing = it->second;
    const ApiCatalogEntry& incoming = entry;  // not moved: try_emplace leaves it intact
    const bool kind_clash = existing.kind != ApiKind::Unknown && incoming.kind != ApiKind::Unknown;
    const bool sink_clash = existing.is_sink() && incoming.is_sink();
    if (kind_clash || sink_clash) throw DomainError("duplicate catalog signature '" + sig + "'");
    if (incoming.kind != ApiKind::Unknown) existing.kind = incoming.kind;
    if (incoming.is_sink()) existing.default_sink_category = incoming.default_sink_category;
    existing.taints_receiver = existing.taints_receiver || incoming.taints_receiver;
  }
}

const ApiCatalogEntry* ApiCatalog::find(std::string_view signature) const {
  auto it = entries_.find(signature);
  return it == entries_.end() ? nullptr : &it->second;
}

ApiKind ApiCatalog::classify(std::string_view signature) const {
  const auto* e = find(signature);
  return e ? e->kind : ApiKind::Unknown;
}

std::set<std::string> ApiCatalog::signatures_of(ApiKind kind) const {
  std::set<std::string> out;
  for (const auto& [sig, e] : entries_) {
    if (e.kind == kind) out.insert(sig);
  }
  return out;
}

std::set<std::string> ApiCatalog::sink_signatures() const {
  std::set<std::string> out;
  for (const auto& [sig, e] : entries_) {
    if (e.is_sink()) out.insert(sig);
  }
  return out;
}

std::set<std::string> ApiCatalog::receiver_tainting() const {
  std::set<std::string> out;
  for (const auto& [sig, e] : entries_) {
    if (e.taints_receiver) out.insert(sig);
  }
  return out;
}

void ApiCatalog::tag_type(std::string type_name, SinkCategory sc) { type_tags_[std::move(type_name)] = sc; }

std::optional<SinkCategory> ApiCatalog::type_tag(std::string_view type_name) const {
  auto it = type_tags_.find(type_name);
  if (it == type_tags_.end()) return std::nullopt;
  return it->second;
}

void CapabilityMatrix::register_detector(const std::string& detector, std::set<int> vuln_ids) {
  if (detector.empty()) throw DomainError("detector id must be non-empty");
  if (vuln_ids.empty()) throw DomainError("detector '" + detector + "' registered with no capabilities");
  for (int id : vuln_ids) require_vuln_id(id);
  matrix_[detector] = std::move(vuln_ids);
}

bool CapabilityMatrix::has_detector(std::string_view detector) const { return matrix_.contains(detector); }

const std::set<int>& CapabilityMatrix::capabilities(std::string_view detector) const {
  auto it = matrix_.find(detector);
  if (it == matrix_.end()) throw DomainError("unregistered detector '" + std::string(detector) + "'");
  return it->second;
}

std::set<std::string> CapabilityMatrix::detectors() const {
  std::set<std::string> out;
  for (const auto& [d, _] : matrix_) out.insert(d);
  return out;
}

std::set<std::string> CapabilityMatrix::capable_detectors(int id) const {
  require_vuln_id(id);
  std::set<std::string> out;
  for (const auto& [d, caps] : matrix_) {
    if (caps.contains(id)) out.insert(d);
  }
  return out;
}

std::set<std::string> CapabilityMatrix::capable_detectors(int id, const std::set<std::string>& chain) const {
  std::set<std::string> out;
  for (const auto& d : capable_detectors(id)) {
    if (chain.contains(d)) out.insert(d);
  }
  return out;
}

bool MappingRule::matches(std::string_view det, std::string_view err_tag, std::string_view api,
                          std::string_view description) const {
  if (det != detector || err_tag != err) return false;
  if (!api_contains.empty() &&
      std::none_of(api_contains.begin(), api_contains.end(),
                   [&](const std::string& s) { return api.find(s) != std::string_view::npos; })) {
    return false;
  }
  if (!desc_keywords.empty() &&
      std::none_of(desc_keywords.begin(), desc_keywords.end(),
                   [&](const std::string& k) { return contains_word_prefix(description, k); })) {
    return false;
  }
  return true;
}

const Taxonomy& Taxonomy::defaults() {
  static const Taxonomy instance = [] {
    Taxonomy base;
    return from_json(json::parse(detail::kDefaultCatalogJson), base);
  }();
  return instance;
}

Taxonomy Taxonomy::from_json(const json& doc) { return from_json(doc, defaults()); }

Taxonomy Taxonomy::from_json(const json& doc, const Taxonomy& base) {
  Taxonomy t = base;
  std::vector<std::string> errors;
  try {
    if (!doc.is_object()) throw ParseError({"catalog document must be a JSON object"});

    if (doc.contains("severity_weights")) {
      for (const auto& [key, value] : doc.at("severity_weights").items()) {
        const int id = std::stoi(key);
        require_vuln_id(id);
        t.weights.severity[static_cast<std::size_t>(id - 1)] = value.get<int>();
      }
    }
    if (doc.contains("sink_weights")) {
      for (const auto& [key, value] : doc.at("sink_weights").items()) {
        t.weights.sink[index_of(parse_sink_category(key))] = value.get<int>();
      }
    }
    if (doc.contains("apis") || doc.contains("sinks") || doc.contains("type_tags")) {
      ApiCatalog rebuilt;
      const bool replace_entries = doc.contains("apis") || doc.contains("sinks");
      if (!replace_entries) {
        for (const auto& [sig, e] : base.catalog.entries()) rebuilt.add(e);
      }
      for (const auto& a : doc.value("apis", json::array())) {
        ApiCatalogEntry e;
        e.signature = a.at("signature").get<std::string>();
        e.kind = parse_kind(a.at("kind").get<std::string>());
        e.taints_receiver = a.value("taints_receiver", false);
        rebuilt.add(std::move(e));
      }
      for (const auto& s : doc.value("sinks", json::array())) {
        ApiCatalogEntry e;
        e.signature = s.at("signature").get<std::string>();
        e.default_sink_category = parse_sink_category(s.at("category").get<std::string>());
        rebuilt.add(std::move(e));
      }
      if (doc.contains("type_tags")) {
        for (const auto& [type, sc] : doc.at("type_tags").items()) {
          rebuilt.tag_type(type, parse_sink_category(sc.get<std::string>()));
        }
      } else {
        for (const auto& [type, sc] : base.catalog.type_tags()) rebuilt.tag_type(type, sc);
      }
      t.catalog = std::move(rebuilt);
    }
    if (doc.contains("detectors")) {
      t.capabilities = CapabilityMatrix{};
      for (const auto& [det, ids] : doc.at("detectors").items()) {
        t.capabilities.register_detector(det, ids.get<std::set<int>>());
      }
    }
    if (doc.contains("mappings")) {
      t.mappings.clear();
      for (const auto& m : doc.at("mappings")) {
        MappingRule r;
        r.detector = m.at("detector").get<std::string>();
        r.err = m.at("err").get<std::string>();
        r.api_contains = m.value("api_contains", std::vector<std::string>{});
        r.desc_keywords = m.value("desc_keywords", std::vector<std::string>{});
        r.vuln_id = m.at("id").get<int>();
        require_vuln_id(r.vuln_id);
        t.mappings.push_back(std::move(r));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError({std::string("catalog: ") + e.what()});
  } catch (const std::invalid_argument& e) {
    throw ParseError({std::string("catalog: ") + e.what()});
  }
  return t;
}

Taxonomy Taxonomy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open catalog '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path, {e.what()});
  }
  return from_json(doc);
}

json Taxonomy::to_json() const {
  json doc;
  doc["catalog_version"] = 1;
  json sev = json::object();
  for (int id = 1; id <= kVulnTypeCount; ++id) sev[std::to_string(id)] = weights.severity_of(id);
  doc["severity_weights"] = sev;
  json sink = json::object();
  for (SinkCategory sc : kSinkCategories) sink[std::string(to_string(sc))] = weights.sink_weight(sc);
  doc["sink_weights"] = sink;
  json apis = json::array();
  json sinks = json::array();
  for (const auto& [sig, e] : catalog.entries()) {
    if (e.kind != ApiKind::Unknown) {
      json a{{"signature", sig}, {"kind", std::string(cryptorisk::to_string(e.kind))}};
      if (e.taints_receiver) a["taints_receiver"] = true;
      apis.push_back(a);
    }
    if (e.is_sink()) {
      sinks.push_back({{"signature", sig}, {"category", std::string(cryptorisk::to_string(*e.default_sink_category))}});
    }
  }
  doc["apis"] = apis;
  doc["sinks"] = sinks;
  json tags = json::object();
  for (const auto& [type, sc] : catalog.type_tags()) tags[type] = std::string(cryptorisk::to_string(sc));
  doc["type_tags"] = tags;
  json dets = json::object();
  for (const auto& d : capabilities.detectors()) dets[d] = capabilities.capabilities(d);
  doc["detectors"] = dets;
  json maps = json::array();
  for (const auto& m : mappings) {
    json r{{"detector", m.detector}, {"err", m.err}, {"id", m.vuln_id}};
    if (!m.api_contains.empty()) r["api_contains"] = m.api_contains;
    if (!m.desc_keywords.empty()) r["desc_keywords"] = m.desc_keywords;
    maps.push_back(r);
  }
  doc["mappings"] = maps;
  return doc;
}

std::set<std::string> Taxonomy::capable_detectors(int id) const { return capabilities.capable_detectors(id); }

std::optional<int> Taxonomy::map_finding(std::string_view detector, std::string_view err, std::string_view api,
                                         std::string_view description) const {
  for (const auto& r : mappings) {
    if (r.matches(detector, err, api, description)) return r.vuln_id;
  }
  return std::nullopt;
}

}  // namespace cryptorisk

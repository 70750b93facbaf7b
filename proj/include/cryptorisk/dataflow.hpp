#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cryptorisk/appir.hpp"
#include "cryptorisk/misuse.hpp"
#include "cryptorisk/taxonomy.hpp"

namespace cryptorisk::dataflow {

inline constexpr int kDefaultDepth = 3;

struct TaintConfig {
  std::set<std::string> sources;            // O
  std::set<std::string> sinks;              // S
  std::set<std::string> receiver_tainting;  // sources whose receiver also carries the label
  int depth = kDefaultDepth;                // K, call-string bound
};

/// Sinks and receiver annotations from the catalog, with the given sources.
TaintConfig make_config(const Taxonomy& taxonomy, std::set<std::string> sources, int depth = kDefaultDepth);

struct TaintFlow {
  appir::Loc source;
  appir::Loc sink;

  auto operator<=>(const TaintFlow&) const = default;
};

/// Flow-sensitive, field-based taint propagation.
///
/// Every method is analyzed as a root. A call to a method defined in the
/// program is additionally analyzed in the callee's body while the call
/// string is shorter than K; the callee's return taint is added on top of the
/// library-call summary (result <- receiver and args, receiver <- args), so
/// raising K only adds flows. Fields are global per name. A flow is reported
/// when a label reaches a sink call's receiver or an argument.
std::set<TaintFlow> taint_connect(const appir::Program& program, const TaintConfig& cfg);

/// Members of O that the program neither defines nor declares external.
std::vector<std::string> unresolved_sources(const appir::Program& program, const TaintConfig& cfg);

/// {m} for a DAPI; for a PAPI, {m} plus every DAPI whose call site (receiver
/// or argument) is tainted from a call of m. Unknown APIs are a DomainError.
std::set<std::string> refine_sources(std::string_view m, const appir::Program& program, const Taxonomy& taxonomy,
                                     int depth = kDefaultDepth);

/// Backward intra-procedural data-source tracking from a sink call: the most
/// sensitive category among the sink's default and the tags of every type met
/// on the def-use chains of its receiver and arguments. DomainError when the
/// location is not a call of a catalog sink.
SinkCategory ds_track(const appir::Program& program, const appir::Loc& sink, const Taxonomy& taxonomy);

/// One (source, sink) pair behind an entry of some tuple's S.
struct FlowRecord {
  MisuseKey misuse;
  appir::Loc source;
  appir::Loc sink;
  SinkCategory category;

  bool operator==(const FlowRecord&) const = default;
};

nlohmann::json to_json(const FlowRecord& f);

struct Annotation {
  std::vector<MisuseTuple> tuples;
  std::vector<FlowRecord> flows;
};

/// Fills S for each tuple: sources are refine_sources(m) (or {m} for an API
/// outside the catalog), flows are kept when the source lies in p, and each
/// distinct sink location contributes one category, in sink location order.
/// A tuple whose p contains no call of m is marked unlocatable and keeps an
/// empty S. Only S and the locatable flag are written.
Annotation annotate(std::vector<MisuseTuple> tuples, const appir::Program& program, const Taxonomy& taxonomy,
                    int depth = kDefaultDepth);

}  // namespace cryptorisk::dataflow

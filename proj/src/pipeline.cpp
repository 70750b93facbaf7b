#include "cryptorisk/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "cryptorisk/adapters.hpp"
#include "cryptorisk/appir.hpp"
#include "cryptorisk/dataflow.hpp"
#include "cryptorisk/detector.hpp"
#include "cryptorisk/error.hpp"
#include "cryptorisk/io.hpp"

namespace cryptorisk::pipeline {

using nlohmann::json;

namespace {

constexpr std::string_view kTuplesSuffix = ".tuples.jsonl";
constexpr std::string_view kUnmappedSuffix = ".unmapped.jsonl";
constexpr std::string_view kManifestSuffix = ".detect.json";
constexpr std::string_view kReportSuffix = ".report.json";

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Input errors are
/// recorded per item; anything else is rethrown after all workers finish.
template <typename Fn>
std::vector<std::string> parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<std::string> errors(n);
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (const ParseError& e) {
        errors[i] = e.what();
      } catch (const DomainError& e) {
        errors[i] = e.what();
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (fatal) std::rethrow_exception(fatal);
  std::vector<std::string> out;
  for (auto& e : errors) {
    if (!e.empty()) out.push_back(std::move(e));
  }
  return out;
}

std::string json_lines(const std::vector<json>& docs) {
  std::string out;
  for (const auto& d : docs) out += d.dump() + "\n";
  return out;
}

std::string pretty(const json& doc) { return doc.dump(2) + "\n"; }

json parse_json(const fs::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), {std::string("malformed JSON: ") + e.what()});
  }
}

struct LoadedProgram {
  fs::path path;
  appir::Program program;
};

/// Parses every CEIR file; failures are reported per file.
std::vector<LoadedProgram> load_programs(const fs::path& input, std::size_t jobs, RunSummary& summary) {
  const auto files = io::list_files(input, ".json");
  std::vector<std::optional<LoadedProgram>> slots(files.size());
  auto errors = parallel_for(files.size(), jobs, [&](std::size_t i) {
    slots[i] = LoadedProgram{files[i], appir::load_program(files[i].string())};
  });
  summary.errors.insert(summary.errors.end(), errors.begin(), errors.end());
  std::vector<LoadedProgram> out;
  std::set<std::string> seen;
  for (auto& s : slots) {
    if (!s) continue;
    if (!seen.insert(s->program.app_id()).second) {
      summary.errors.push_back(s->path.string() + ": app id '" + s->program.app_id() + "' already used");
      continue;
    }
    out.push_back(std::move(*s));
  }
  return out;
}

void check_chain(const std::set<std::string>& chain, const Taxonomy& taxonomy, const char* what) {
  if (chain.empty()) throw DomainError(std::string(what) + " must not be empty");
  for (const auto& d : chain) {
    if (!taxonomy.capabilities.has_detector(d)) {
      throw DomainError(std::string(what) + " names unregistered detector '" + d + "'");
    }
  }
}

std::vector<risk::AppRiskReport> load_reports(const fs::path& dir, const Taxonomy& taxonomy) {
  std::vector<risk::AppRiskReport> out;
  std::vector<std::string> errors;
  for (const auto& path : io::list_files(dir, kReportSuffix)) {
    try {
      out.push_back(risk::report_from_json(parse_json(path), taxonomy.weights));
    } catch (const ParseError& e) {
      for (const auto& v : e.violations()) errors.push_back(path.string() + ": " + v);
    }
  }
  if (!errors.empty()) throw ParseError(std::move(errors));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.app < b.app; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].app == out[i - 1].app) throw ParseError({"duplicate report for app '" + out[i].app + "'"});
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Taxonomy load_taxonomy(const PipelineConfig& cfg) {
  Taxonomy t = cfg.catalog ? Taxonomy::load(cfg.catalog->string()) : Taxonomy::defaults();
  if (cfg.weights) {
    try {
      t = Taxonomy::from_json(json::parse(io::read_file(*cfg.weights)), t);
    } catch (const json::parse_error& e) {
      throw ParseError(cfg.weights->string(), {std::string("malformed JSON: ") + e.what()});
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// detect

RunSummary cmd_detect(const fs::path& programs, const std::optional<fs::path>& reports, const fs::path& out,
                      const PipelineConfig& cfg) {
  const Taxonomy taxonomy = load_taxonomy(cfg);
  RunSummary summary;
  auto loaded = load_programs(programs, cfg.jobs, summary);

  // <app>.<detector>.json
  std::map<std::string, std::vector<std::pair<std::string, fs::path>>> by_app;
  if (reports) {
    std::set<std::string> known;
    for (const auto& p : loaded) known.insert(p.program.app_id());
    for (const auto& path : io::list_files(*reports, ".json")) {
      const std::string stem = io::stem_of(path, ".json");
      const auto dot = stem.rfind('.');
      if (dot == std::string::npos) {
        summary.errors.push_back(path.string() + ": expected a name of the form <app>.<detector>.json");
        continue;
      }
      const std::string app = stem.substr(0, dot);
      const std::string det = stem.substr(dot + 1);
      if (!known.contains(app)) {
        summary.errors.push_back(path.string() + ": no program for app '" + app + "'");
        continue;
      }
      by_app[app].emplace_back(det, path);
    }
  }

  auto errors = parallel_for(loaded.size(), cfg.jobs, [&](std::size_t i) {
    const appir::Program& program = loaded[i].program;
    const std::string& app = program.app_id();
    std::vector<MisuseTuple> all = detector::detect(program);
    std::set<std::string> detectors{std::string(detector::kDetectorId)};
    std::vector<json> unmapped;
    for (const auto& [det, path] : by_app[app]) {
      auto parsed = adapters::parse_report_text(det, io::read_file(path), taxonomy, path.string());
      all.insert(all.end(), parsed.tuples.begin(), parsed.tuples.end());
      for (const auto& u : parsed.unmapped) unmapped.push_back(adapters::to_json(u));
      detectors.insert(det);
    }
    auto merged = adapters::merge_and_dedup(std::move(all));
    io::write_atomic(out / (app + std::string(kTuplesSuffix)), to_jsonl(merged));
    io::write_atomic(out / (app + std::string(kUnmappedSuffix)), json_lines(unmapped));
    json manifest{{"app", app},
                  {"program", loaded[i].path.filename().string()},
                  {"detectors", detectors},
                  {"tuples", merged.size()},
                  {"unmapped", unmapped.size()}};
    io::write_atomic(out / (app + std::string(kManifestSuffix)), pretty(manifest));
  });
  summary.errors.insert(summary.errors.end(), errors.begin(), errors.end());
  summary.apps = loaded.size();
  return summary;
}

// ---------------------------------------------------------------------------
// assess

RunSummary cmd_assess(const fs::path& programs, const fs::path& tuples, const fs::path& out,
                      const PipelineConfig& cfg) {
  const Taxonomy taxonomy = load_taxonomy(cfg);
  check_chain(cfg.chain, taxonomy, "risk chain");
  if (cfg.vote_chain) check_chain(*cfg.vote_chain, taxonomy, "vote chain");
  if (cfg.require_valid_chain) {
    auto check = adapters::validate_chain(cfg.chain, taxonomy);
    if (!check.valid()) {
      std::string ids;
      for (int id : check.missing_ids) ids += (ids.empty() ? "" : ",") + std::to_string(id);
      throw DomainError("risk chain does not cover vulnerability ids {" + ids + "}");
    }
  }
  if (!fs::is_directory(tuples)) throw DomainError("'" + tuples.string() + "' is not a directory");

  RunSummary summary;
  auto loaded = load_programs(programs, cfg.jobs, summary);
  std::vector<std::string> rows(loaded.size());

  auto errors = parallel_for(loaded.size(), cfg.jobs, [&](std::size_t i) {
    const appir::Program& program = loaded[i].program;
    const std::string& app = program.app_id();
    const fs::path tuples_path = tuples / (app + std::string(kTuplesSuffix));
    auto detected = misuses_from_jsonl(io::read_file(tuples_path), tuples_path.string());

    std::set<std::string> ran;
    std::size_t unmapped = 0;
    const fs::path manifest_path = tuples / (app + std::string(kManifestSuffix));
    if (fs::exists(manifest_path)) {
      const json manifest = parse_json(manifest_path);
      ran = manifest.value("detectors", std::set<std::string>{});
      unmapped = manifest.value("unmapped", std::size_t{0});
    } else {
      for (const auto& t : detected) ran.insert(t.reporters.begin(), t.reporters.end());
    }
    const std::set<std::string> vote_chain = cfg.vote_chain.value_or(ran);

    auto annotated = dataflow::annotate(std::move(detected), program, taxonomy, cfg.depth);
    std::map<std::string, std::vector<MisuseTuple>> by_detector;
    for (const auto& t : annotated.tuples) {
      for (const auto& r : t.reporters) {
        MisuseTuple copy = t;
        copy.t = r;
        copy.reporters = {r};
        by_detector[r].push_back(std::move(copy));
      }
    }
    auto verdict = risk::vote(by_detector, taxonomy.capabilities, vote_chain, cfg.vote_threshold);
    auto report = risk::build_report(app, std::move(verdict.expected), std::move(verdict.rejected), cfg.chain,
                                     vote_chain, taxonomy.weights);
    report.unmapped = unmapped;

    std::vector<json> flows;
    for (const auto& f : annotated.flows) flows.push_back(dataflow::to_json(f));
    io::write_atomic(out / (app + ".annotated.jsonl"), to_jsonl(annotated.tuples));
    io::write_atomic(out / (app + ".flows.jsonl"), json_lines(flows));
    io::write_atomic(out / (app + std::string(kReportSuffix)), pretty(risk::to_json(report)));
    rows[i] = risk::csv_row(report);
  });
  summary.errors.insert(summary.errors.end(), errors.begin(), errors.end());

  std::vector<std::pair<std::string, std::string>> sorted;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    if (!rows[i].empty()) sorted.emplace_back(loaded[i].program.app_id(), rows[i]);
  }
  std::sort(sorted.begin(), sorted.end());
  std::string csv = risk::csv_header(cfg.chain) + "\n";
  for (const auto& [app, row] : sorted) csv += row + "\n";
  io::write_atomic(out / "reports.csv", csv);
  summary.apps = loaded.size();
  return summary;
}

// ---------------------------------------------------------------------------
// fleet

RunSummary cmd_fleet_cluster(const fs::path& reports, const fs::path& out, const PipelineConfig& cfg) {
  const Taxonomy taxonomy = load_taxonomy(cfg);
  const auto loaded = load_reports(reports, taxonomy);
  const std::size_t n = loaded.size();
  const std::size_t needed = cfg.k.value_or(cfg.k_min);
  if (needed < 1) throw DomainError("k must be at least 1");
  if (n < needed) {
    throw DomainError("fleet clustering needs at least " + std::to_string(needed) + " apps, found " +
                      std::to_string(n));
  }
  if (cfg.k_min > cfg.k_max) throw DomainError("empty k range");

  std::vector<fleet::FeatureVector> features;
  std::vector<std::vector<double>> points;
  for (const auto& r : loaded) {
    features.push_back(fleet::extract_features(r, cfg.mu));
    points.push_back(fleet::flatten(features.back(), cfg.nu_only));
  }

  std::string sweep = "k,dbi,objective,label_discrimination\n";
  std::optional<std::pair<double, std::size_t>> best;
  for (std::size_t k = std::max<std::size_t>(cfg.k_min, 2); k <= std::min(cfg.k_max, n); ++k) {
    const auto km = fleet::kmeans(points, k, cfg.seed);
    std::string dbi_text = "NA";
    try {
      const double d = fleet::dbi(points, km.assignment, km.centroids);
      dbi_text = format_double(d);
      if (!best || d < best->first) best = {d, k};
    } catch (const DomainError&) {
      // Fewer distinct apps than k leaves a cluster empty; DBI is undefined.
    }
    sweep += std::to_string(k) + "," + dbi_text + "," + format_double(km.objective.back()) + "," +
             format_double(fleet::label_discrimination(fleet::summarize(features, km))) + "\n";
  }
  const std::size_t k = cfg.k ? *cfg.k : (best ? best->second : std::max<std::size_t>(cfg.k_min, 1));

  const auto km = fleet::kmeans(points, k, cfg.seed);
  const auto summaries = fleet::summarize(features, km);
  std::string clusters = "app,cluster\n";
  for (std::size_t i = 0; i < n; ++i) clusters += loaded[i].app + "," + std::to_string(km.assignment[i]) + "\n";

  json dbi_value = nullptr;
  if (k >= 2) {
    try {
      dbi_value = fleet::dbi(points, km.assignment, km.centroids);
    } catch (const DomainError&) {
    }
  }
  json cluster_docs = json::array();
  for (const auto& s : summaries) cluster_docs.push_back(fleet::to_json(s));
  json doc{{"k", k},
           {"seed", cfg.seed},
           {"nu_only", cfg.nu_only},
           {"dimensions", points.front().size()},
           {"apps", n},
           {"iterations", km.iterations},
           {"converged", km.converged},
           {"objective", km.objective.back()},
           {"dbi", dbi_value},
           {"clusters", cluster_docs}};

  io::write_atomic(out / "clusters.csv", clusters);
  io::write_atomic(out / "summaries.json", pretty(doc));
  io::write_atomic(out / "dbi_by_k.csv", sweep);
  return {n, {}, {}};
}

RunSummary cmd_fleet_mine(const fs::path& reports, const fs::path& out, const PipelineConfig& cfg) {
  const Taxonomy taxonomy = load_taxonomy(cfg);
  const auto loaded = load_reports(reports, taxonomy);
  std::vector<fpgrowth::Transaction> transactions;
  for (const auto& r : loaded) transactions.push_back(fpgrowth::transaction_of(r.n));
  const auto rules = fpgrowth::mine_rules(transactions, cfg.min_support, cfg.min_conf);
  io::write_atomic(out / "rules.csv", fpgrowth::rules_csv(rules));
  return {loaded.size(), {}, {}};
}

std::string cmd_report(const fs::path& reports, const PipelineConfig& cfg) {
  const Taxonomy taxonomy = load_taxonomy(cfg);
  auto loaded = load_reports(reports, taxonomy);
  std::stable_sort(loaded.begin(), loaded.end(), [](const auto& a, const auto& b) { return a.risk > b.risk; });
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-32s %12s %9s %9s %7s\n", "app", "risk", "expected", "rejected", "flows");
  out += line;
  for (const auto& r : loaded) {
    std::int64_t flows = 0;
    for (const auto& row : r.n) {
      for (auto v : row) flows += v;
    }
    std::snprintf(line, sizeof line, "%-32s %12lld %9zu %9zu %7lld\n", r.app.c_str(), static_cast<long long>(r.risk),
                  r.expected.size(), r.rejected.size(), static_cast<long long>(flows));
    out += line;
  }
  return out;
}

}  // namespace cryptorisk::pipeline

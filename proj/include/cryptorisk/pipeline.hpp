#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cryptorisk/fleet.hpp"
#include "cryptorisk/fpgrowth.hpp"
#include "cryptorisk/risk.hpp"
#include "cryptorisk/taxonomy.hpp"

namespace cryptorisk::pipeline {

namespace fs = std::filesystem;

struct PipelineConfig {
  std::optional<fs::path> catalog;  // replaces the embedded catalog
  std::optional<fs::path> weights;  // partial catalog document applied on top
  std::set<std::string> chain{"CG", "CC", "BI"};
  std::optional<std::set<std::string>> vote_chain;  // default: detectors that produced input
  risk::Fraction vote_threshold{1, 2};
  bool require_valid_chain = false;
  int depth = 3;
  std::size_t jobs = 1;

  std::uint64_t seed = 1;
  std::optional<std::size_t> k;  // default: lowest DBI over k_range
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  bool nu_only = false;
  fleet::MuDetectors mu = fleet::kDefaultMuDetectors;
  std::size_t min_support = fpgrowth::kDefaultMinSupportApps;
  risk::Fraction min_conf = fpgrowth::kDefaultMinConfidence;
};

Taxonomy load_taxonomy(const PipelineConfig& cfg);

/// Outcome of a batch command. Per-app input errors do not stop other apps;
/// they are collected here and make the command exit with 1.
struct RunSummary {
  std::size_t apps = 0;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
};

/// programs: a CEIR file or a directory of *.json files. reports (optional):
/// directory of external reports named <app>.<detector>.json. Writes, per app,
/// <app>.tuples.jsonl (merged), <app>.unmapped.jsonl and <app>.detect.json
/// (the detectors that produced input).
RunSummary cmd_detect(const fs::path& programs, const std::optional<fs::path>& reports, const fs::path& out,
                      const PipelineConfig& cfg);

/// Reads detect outputs from `tuples`, annotates, votes and scores. Writes
/// <app>.annotated.jsonl, <app>.flows.jsonl, <app>.report.json and reports.csv.
RunSummary cmd_assess(const fs::path& programs, const fs::path& tuples, const fs::path& out,
                      const PipelineConfig& cfg);

/// Clusters the *.report.json apps. Writes clusters.csv, summaries.json and
/// dbi_by_k.csv. DomainError when there are fewer apps than k.
RunSummary cmd_fleet_cluster(const fs::path& reports, const fs::path& out, const PipelineConfig& cfg);

/// Mines label association rules over the *.report.json apps into rules.csv.
RunSummary cmd_fleet_mine(const fs::path& reports, const fs::path& out, const PipelineConfig& cfg);

/// Human-readable table of the *.report.json apps, highest risk first.
std::string cmd_report(const fs::path& reports, const PipelineConfig& cfg);

}  // namespace cryptorisk::pipeline

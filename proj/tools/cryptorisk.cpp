#include <charconv>
#include <filesystem>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cryptorisk/error.hpp"
#include "cryptorisk/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cryptorisk;
using pipeline::PipelineConfig;

namespace {

std::set<std::string> split_ids(const std::string& text) {
  std::set<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.insert(item);
  }
  if (out.empty()) throw DomainError("empty detector list '" + text + "'");
  return out;
}

std::size_t parse_size(const std::string& text, const char* what) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw DomainError(std::string("bad ") + what + " '" + text + "'");
  }
  return v;
}

int finish(const pipeline::RunSummary& s) {
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& e : s.errors) std::cerr << "error: " << e << "\n";
  std::cerr << s.apps << " app(s), " << s.errors.size() << " error(s)\n";
  return s.errors.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crypto-misuse detection, sink-aware risk scoring and fleet analysis"};
  app.require_subcommand(1);

  PipelineConfig cfg;
  std::string catalog, weights, chain, vote_chain, threshold, min_conf, k_range, mu;
  std::size_t jobs = 1;
  bool full_chain = false;

  app.add_option("--catalog", catalog, "Catalog JSON replacing the embedded one")->check(CLI::ExistingFile);
  app.add_option("--weights", weights, "Partial catalog JSON overriding weights")->check(CLI::ExistingFile);
  app.add_option("-j,--jobs", jobs, "Apps processed in parallel")->check(CLI::PositiveNumber);

  fs::path in, reports_dir, out;
  std::string reports_opt;

  auto* detect = app.add_subcommand("detect", "Run the built-in detector and merge external reports");
  detect->add_option("programs", in, "CEIR file or directory")->required();
  detect->add_option("--reports", reports_opt, "Directory of <app>.<detector>.json reports");
  detect->add_option("-o,--out", out, "Output directory")->required();

  auto* assess = app.add_subcommand("assess", "Annotate sinks, vote and score each app");
  std::string tuples_dir;
  assess->add_option("programs", in, "CEIR file or directory")->required();
  assess->add_option("--tuples", tuples_dir, "Output directory of detect")->required();
  assess->add_option("-o,--out", out, "Output directory")->required();
  assess->add_option("--chain", chain, "Detectors gating the risk value (default CG,CC,BI)");
  assess->add_option("--vote-chain", vote_chain, "Detectors that vote (default: those that produced input)");
  assess->add_option("--vote-threshold", threshold, "Acceptance ratio, strictly exceeded (default 1/2)");
  assess->add_flag("--require-valid-chain", full_chain, "Fail unless the risk chain covers all 21 ids");
  assess->add_option("--depth", cfg.depth, "Call-string depth of the taint analysis")->check(CLI::NonNegativeNumber);

  auto* fleet = app.add_subcommand("fleet", "Fleet-scale clustering and rule mining");
  fleet->require_subcommand(1);
  auto* cluster = fleet->add_subcommand("cluster", "k-means over risk features");
  cluster->add_option("reports", reports_dir, "Directory of *.report.json")->required();
  cluster->add_option("-o,--out", out, "Output directory")->required();
  cluster->add_option("--seed", cfg.seed, "Initialization seed");
  std::size_t k = 0;
  cluster->add_option("--k", k, "Cluster count (default: lowest DBI over --k-range)")->check(CLI::PositiveNumber);
  cluster->add_option("--k-range", k_range, "Sweep range lo:hi (default 2:10)");
  cluster->add_flag("--nu-only", cfg.nu_only, "Cluster on flow counts only");
  cluster->add_option("--mu-detectors", mu, "Two detectors forming the detection flags (default CG,CC)");

  auto* mine = fleet->add_subcommand("mine", "Association rules between (id, category) labels");
  mine->add_option("reports", reports_dir, "Directory of *.report.json")->required();
  mine->add_option("-o,--out", out, "Output directory")->required();
  mine->add_option("--min-support", cfg.min_support, "Apps containing a rule's labels must exceed this");
  mine->add_option("--min-conf", min_conf, "Confidence must exceed this (default 0.8)");

  auto* report = app.add_subcommand("report", "Summary table of scored apps");
  report->add_option("reports", reports_dir, "Directory of *.report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (!catalog.empty()) cfg.catalog = catalog;
    if (!weights.empty()) cfg.weights = weights;
    cfg.jobs = jobs;
    if (!chain.empty()) cfg.chain = split_ids(chain);
    if (!vote_chain.empty()) cfg.vote_chain = split_ids(vote_chain);
    if (!threshold.empty()) cfg.vote_threshold = risk::Fraction::parse(threshold);
    if (!min_conf.empty()) cfg.min_conf = risk::Fraction::parse(min_conf);
    cfg.require_valid_chain = full_chain;
    if (k > 0) cfg.k = k;
    if (!k_range.empty()) {
      const auto colon = k_range.find(':');
      if (colon == std::string::npos) throw DomainError("--k-range expects lo:hi");
      cfg.k_min = parse_size(k_range.substr(0, colon), "k-range");
      cfg.k_max = parse_size(k_range.substr(colon + 1), "k-range");
    }
    if (!mu.empty()) {
      const auto comma = mu.find(',');
      if (comma == std::string::npos || mu.find(',', comma + 1) != std::string::npos) {
        throw DomainError("--mu-detectors expects exactly two detectors");
      }
      cfg.mu = {mu.substr(0, comma), mu.substr(comma + 1)};
    }

    if (*detect) {
      std::optional<fs::path> reports;
      if (!reports_opt.empty()) reports = reports_opt;
      return finish(pipeline::cmd_detect(in, reports, out, cfg));
    }
    if (*assess) return finish(pipeline::cmd_assess(in, tuples_dir, out, cfg));
    if (*cluster) return finish(pipeline::cmd_fleet_cluster(reports_dir, out, cfg));
    if (*mine) return finish(pipeline::cmd_fleet_mine(reports_dir, out, cfg));
    if (*report) {
      std::cout << pipeline::cmd_report(reports_dir, cfg);
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

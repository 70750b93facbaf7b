#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cryptorisk/risk.hpp"
#include "cryptorisk/taxonomy.hpp"

namespace cryptorisk::fleet {

inline constexpr std::size_t kMuDetectors = 2;
inline constexpr std::size_t kMuDims = kMuDetectors * kVulnTypeCount;        // 42
inline constexpr std::size_t kNuDims = kSinkCategoryCount * kVulnTypeCount;  // 189
inline constexpr std::size_t kFeatureDims = kMuDims + kNuDims;               // 231

/// Flat layout:
///   mu: index 2*(id-1) + t, t the position of the detector in mu_detectors
///   nu: index 42 + 9*(id-1) + sc, sc in canonical category order
/// A nu-only vector drops the first 42 entries.
constexpr std::size_t mu_index(int id, std::size_t t) { return kMuDetectors * static_cast<std::size_t>(id - 1) + t; }
constexpr std::size_t nu_index(int id, SinkCategory sc) {
  return kMuDims + kSinkCategoryCount * static_cast<std::size_t>(id - 1) + index_of(sc);
}

struct FeatureVector {
  std::string app;
  std::array<risk::DetectFlags, kMuDetectors> mu{};  // [t][id-1]
  risk::FlowMatrix nu{};                             // [sc][id-1]

  bool operator==(const FeatureVector&) const = default;
};

/// The two detectors whose flags form mu, in order. Default {CG, CC}.
using MuDetectors = std::array<std::string, kMuDetectors>;
inline const MuDetectors kDefaultMuDetectors{"CG", "CC"};

FeatureVector extract_features(const risk::AppRiskReport& report, const MuDetectors& mu = kDefaultMuDetectors);

std::vector<double> flatten(const FeatureVector& f, bool nu_only = false);
/// Inverse of flatten. DomainError on a wrong length or a non-integral entry.
FeatureVector unflatten(std::string app, std::span<const double> values, bool nu_only = false);

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<std::vector<double>> centroids;
  std::vector<double> objective;  // within-cluster sum of squares after each assignment step
  std::size_t iterations = 0;
  bool converged = false;
};

inline constexpr std::size_t kMaxIterations = 300;

/// Lloyd's algorithm. Initial centroids are k distinct points drawn with a
/// seeded mt19937_64 (duplicates only when fewer than k distinct points
/// exist). Ties go to the lowest cluster index; an empty cluster keeps its
/// previous centroid. DomainError unless 1 <= k <= points.size().
KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = kMaxIterations);

/// Davies-Bouldin index: mean over clusters of max_j (S_i + S_j) / d(c_i, c_j),
/// S the mean member distance to the centroid. Coincident centroids give 0
/// when both scatters are 0 and +inf otherwise. DomainError for fewer than two
/// clusters or an empty cluster.
double dbi(const std::vector<std::vector<double>>& points, const std::vector<std::size_t>& assignment,
           const std::vector<std::vector<double>>& centroids);

struct LabelStat {
  int id;
  SinkCategory sc;
  std::int64_t total;          // flows over all members
  std::size_t apps;            // members with at least one such flow
  double average;              // total / members
  double percent;              // share of all flows in the cluster

  bool operator==(const LabelStat&) const = default;
};

/// Every (id, sc) with a positive total, ranked by average descending then
/// (id, category name); at most top_n entries (0 = all).
std::vector<LabelStat> top_labels(const std::vector<const FeatureVector*>& members, std::size_t top_n = 3);

struct ClusterSummary {
  std::size_t cluster;
  std::vector<std::string> members;
  std::vector<double> centroid;
  std::vector<LabelStat> labels;
};

std::vector<ClusterSummary> summarize(const std::vector<FeatureVector>& features, const KMeansResult& result,
                                      std::size_t top_n = 3);

nlohmann::json to_json(const ClusterSummary& s);

/// Distinct top-1 labels across clusters divided by the number of clusters;
/// clusters without labels share a single "none" label. 1 means every cluster
/// is summarized by a different threat.
double label_discrimination(const std::vector<ClusterSummary>& summaries);

}  // namespace cryptorisk::fleet

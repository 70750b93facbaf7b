#include "cryptorisk/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "cryptorisk/error.hpp"

namespace cryptorisk::fleet {

using nlohmann::json;

FeatureVector extract_features(const risk::AppRiskReport& report, const MuDetectors& mu) {
  FeatureVector f;
  f.app = report.app;
  for (std::size_t t = 0; t < kMuDetectors; ++t) {
    for (int id = 1; id <= kVulnTypeCount; ++id) f.mu[t][id - 1] = report.flag(mu[t], id);
  }
  f.nu = report.n;
  return f;
}

std::vector<double> flatten(const FeatureVector& f, bool nu_only) {
  std::vector<double> out(kFeatureDims, 0.0);
  for (int id = 1; id <= kVulnTypeCount; ++id) {
    for (std::size_t t = 0; t < kMuDetectors; ++t) out[mu_index(id, t)] = f.mu[t][id - 1];
    for (SinkCategory sc : kSinkCategories) {
      out[nu_index(id, sc)] = static_cast<double>(f.nu[index_of(sc)][id - 1]);
    }
  }
  if (nu_only) out.erase(out.begin(), out.begin() + kMuDims);
  return out;
}

FeatureVector unflatten(std::string app, std::span<const double> values, bool nu_only) {
  const std::size_t expected = nu_only ? kNuDims : kFeatureDims;
  if (values.size() != expected) {
    throw DomainError("feature vector has " + std::to_string(values.size()) + " entries, expected " +
                      std::to_string(expected));
  }
  const std::size_t offset = nu_only ? kMuDims : 0;
  auto at = [&](std::size_t index) {
    const double v = values[index - offset];
    if (v != std::floor(v) || v < 0) throw DomainError("feature entry " + std::to_string(index) + " is not a count");
    return static_cast<std::int64_t>(v);
  };
  FeatureVector f;
  f.app = std::move(app);
  for (int id = 1; id <= kVulnTypeCount; ++id) {
    if (!nu_only) {
      for (std::size_t t = 0; t < kMuDetectors; ++t) f.mu[t][id - 1] = static_cast<int>(at(mu_index(id, t)));
    }
    for (SinkCategory sc : kSinkCategories) f.nu[index_of(sc)][id - 1] = at(nu_index(id, sc));
  }
  return f;
}

// ---------------------------------------------------------------------------
// k-means

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

std::size_t nearest(const std::vector<double>& p, const std::vector<std::vector<double>>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::vector<std::size_t> initial_indices(const std::vector<std::vector<double>>& points, std::size_t k,
                                         std::uint64_t seed) {
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Explicit Fisher-Yates: std::shuffle's draw sequence is library-specific.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

  std::vector<std::size_t> chosen;
  for (std::size_t i : order) {
    if (chosen.size() == k) break;
    bool duplicate = std::any_of(chosen.begin(), chosen.end(), [&](std::size_t c) { return points[c] == points[i]; });
    if (!duplicate) chosen.push_back(i);
  }
  for (std::size_t i : order) {
    if (chosen.size() == k) break;
    if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) chosen.push_back(i);
  }
  return chosen;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations) {
  if (k < 1 || k > points.size()) {
    throw DomainError("k = " + std::to_string(k) + " is outside 1.." + std::to_string(points.size()));
  }
  const std::size_t dims = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dims) throw DomainError("points have differing dimensions");
  }

  KMeansResult r;
  for (std::size_t i : initial_indices(points, k, seed)) r.centroids.push_back(points[i]);

  while (r.iterations < max_iterations) {
    std::vector<std::size_t> assignment(points.size());
    double sse = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      assignment[i] = nearest(points[i], r.centroids);
      sse += squared_distance(points[i], r.centroids[assignment[i]]);
    }
    ++r.iterations;
    r.objective.push_back(sse);
    if (assignment == r.assignment) {
      r.converged = true;
      break;
    }
    r.assignment = std::move(assignment);

    std::vector<std::vector<double>> sums(k, std::vector<double>(dims, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::size_t c = r.assignment[i];
      ++counts[c];
      for (std::size_t d = 0; d < dims; ++d) sums[c][d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dims; ++d) r.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
  }
  return r;
}

double dbi(const std::vector<std::vector<double>>& points, const std::vector<std::size_t>& assignment,
           const std::vector<std::vector<double>>& centroids) {
  const std::size_t k = centroids.size();
  if (k < 2) throw DomainError("DBI needs at least two clusters");
  if (assignment.size() != points.size()) throw DomainError("assignment size differs from point count");
  std::vector<double> scatter(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t c = assignment[i];
    if (c >= k) throw DomainError("assignment names a cluster that does not exist");
    scatter[c] += std::sqrt(squared_distance(points[i], centroids[c]));
    ++counts[c];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) throw DomainError("cluster " + std::to_string(c) + " is empty");
    scatter[c] /= static_cast<double>(counts[c]);
  }
  double total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double worst = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const double s = scatter[i] + scatter[j];
      const double d = std::sqrt(squared_distance(centroids[i], centroids[j]));
      const double ratio = d > 0 ? s / d : (s > 0 ? std::numeric_limits<double>::infinity() : 0.0);
      worst = std::max(worst, ratio);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

// ---------------------------------------------------------------------------
// Summaries

std::vector<LabelStat> top_labels(const std::vector<const FeatureVector*>& members, std::size_t top_n) {
  if (members.empty()) throw DomainError("top_labels needs a non-empty cluster");
  std::vector<LabelStat> labels;
  std::int64_t all = 0;
  for (int id = 1; id <= kVulnTypeCount; ++id) {
    for (SinkCategory sc : kSinkCategories) {
      LabelStat l{id, sc, 0, 0, 0.0, 0.0};
      for (const FeatureVector* f : members) {
        const std::int64_t v = f->nu[index_of(sc)][id - 1];
        l.total += v;
        l.apps += v > 0 ? 1 : 0;
      }
      if (l.total == 0) continue;
      all += l.total;
      l.average = static_cast<double>(l.total) / static_cast<double>(members.size());
      labels.push_back(l);
    }
  }
  for (auto& l : labels) l.percent = 100.0 * static_cast<double>(l.total) / static_cast<double>(all);
  std::stable_sort(labels.begin(), labels.end(), [](const LabelStat& a, const LabelStat& b) {
    if (a.total != b.total) return a.total > b.total;  // same member count, so same order as average
    if (a.id != b.id) return a.id < b.id;
    return to_string(a.sc) < to_string(b.sc);
  });
  if (top_n > 0 && labels.size() > top_n) labels.resize(top_n);
  return labels;
}

std::vector<ClusterSummary> summarize(const std::vector<FeatureVector>& features, const KMeansResult& result,
                                      std::size_t top_n) {
  if (result.assignment.size() != features.size()) throw DomainError("assignment size differs from app count");
  std::vector<ClusterSummary> out;
  for (std::size_t c = 0; c < result.centroids.size(); ++c) {
    ClusterSummary s{c, {}, result.centroids[c], {}};
    std::vector<const FeatureVector*> members;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (result.assignment[i] != c) continue;
      members.push_back(&features[i]);
      s.members.push_back(features[i].app);
    }
    if (!members.empty()) s.labels = top_labels(members, top_n);
    out.push_back(std::move(s));
  }
  return out;
}

json to_json(const ClusterSummary& s) {
  json labels = json::array();
  for (const auto& l : s.labels) {
    labels.push_back({{"id", l.id},
                      {"sc", std::string(to_string(l.sc))},
                      {"flows", l.total},
                      {"apps_with_label", l.apps},
                      {"avg_per_app", l.average},
                      {"percent", l.percent}});
  }
  return {{"cluster", s.cluster}, {"size", s.members.size()}, {"members", s.members}, {"top_labels", labels}};
}

double label_discrimination(const std::vector<ClusterSummary>& summaries) {
  if (summaries.empty()) return 0.0;
  std::set<std::pair<int, int>> tops;
  for (const auto& s : summaries) {
    tops.insert(s.labels.empty() ? std::pair{0, 0} : std::pair{s.labels.front().id, static_cast<int>(s.labels.front().sc)});
  }
  return static_cast<double>(tops.size()) / static_cast<double>(summaries.size());
}

}  // namespace cryptorisk::fleet

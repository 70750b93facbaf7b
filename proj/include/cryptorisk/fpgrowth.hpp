#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cryptorisk/risk.hpp"
#include "cryptorisk/taxonomy.hpp"

namespace cryptorisk::fpgrowth {

using Item = std::uint32_t;
using Itemset = std::vector<Item>;  // sorted ascending
using Transaction = std::set<Item>;

/// Every itemset contained in at least min_count transactions, with its
/// support count, mined from an FP-tree. min_count must be at least 1.
std::map<Itemset, std::size_t> frequent_itemsets(const std::vector<Transaction>& transactions, std::size_t min_count);

/// A (vulnerability id, sink category) label packed as one item.
constexpr Item label_item(int id, SinkCategory sc) {
  return static_cast<Item>((id - 1) * kSinkCategoryCount + static_cast<int>(index_of(sc)));
}
int label_id(Item item);
SinkCategory label_category(Item item);
/// "12:NETWORK"
std::string label_name(Item item);

/// Labels with a positive flow count in the report.
Transaction transaction_of(const risk::FlowMatrix& n);

inline constexpr std::size_t kDefaultMinSupportApps = 500;
inline const risk::Fraction kDefaultMinConfidence{4, 5};

struct AssociationRule {
  Item antecedent;
  Item consequent;
  std::size_t antecedent_count;
  std::size_t joint_count;
  risk::Fraction confidence;  // joint / antecedent

  bool operator==(const AssociationRule&) const = default;
};

/// Single-label rules a -> c with joint app count > min_support_apps and
/// confidence > min_conf, both strict. Sorted by confidence descending, then
/// joint count descending, then (antecedent, consequent).
std::vector<AssociationRule> mine_rules(const std::vector<Transaction>& transactions,
                                        std::size_t min_support_apps = kDefaultMinSupportApps,
                                        const risk::Fraction& min_conf = kDefaultMinConfidence);

std::string rules_csv(const std::vector<AssociationRule>& rules);

}  // namespace cryptorisk::fpgrowth

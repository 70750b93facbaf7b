#include "cryptorisk/fpgrowth.hpp"

#include <algorithm>

#include "cryptorisk/error.hpp"

namespace cryptorisk::fpgrowth {

namespace {

using WeightedTransaction = std::pair<std::vector<Item>, std::size_t>;

class FpTree {
 public:
  FpTree(const std::vector<WeightedTransaction>& db, std::size_t min_count) {
    std::map<Item, std::size_t> support;
    for (const auto& [items, count] : db) {
      for (Item i : items) support[i] += count;
    }
    for (const auto& [item, s] : support) {
      if (s >= min_count) rank_.emplace(item, s);
    }
    nodes_.push_back({0, 0, kNone, {}});
    for (const auto& [items, count] : db) {
      std::vector<Item> kept;
      for (Item i : items) {
        if (rank_.contains(i)) kept.push_back(i);
      }
      // Frequency descending, then item id: a fixed global order per tree.
      std::sort(kept.begin(), kept.end(), [&](Item a, Item b) {
        if (rank_[a] != rank_[b]) return rank_[a] > rank_[b];
        return a < b;
      });
      insert(kept, count);
    }
  }

  bool empty() const { return rank_.empty(); }

  /// Items with their support in this tree.
  const std::map<Item, std::size_t>& items() const { return rank_; }

  /// Prefix paths leading to every node of `item`, weighted by that node's count.
  std::vector<WeightedTransaction> conditional_base(Item item) const {
    std::vector<WeightedTransaction> base;
    for (std::size_t n : links_.at(item)) {
      std::vector<Item> path;
      for (std::size_t p = nodes_[n].parent; p != 0; p = nodes_[p].parent) path.push_back(nodes_[p].item);
      if (!path.empty()) base.emplace_back(std::move(path), nodes_[n].count);
    }
    return base;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Node {
    Item item;
    std::size_t count;
    std::size_t parent;
    std::map<Item, std::size_t> children;
  };

  void insert(const std::vector<Item>& items, std::size_t count) {
    std::size_t at = 0;
    for (Item i : items) {
      auto it = nodes_[at].children.find(i);
      if (it == nodes_[at].children.end()) {
        nodes_.push_back({i, 0, at, {}});
        const std::size_t created = nodes_.size() - 1;
        nodes_[at].children.emplace(i, created);
        links_[i].push_back(created);
        at = created;
      } else {
        at = it->second;
      }
      nodes_[at].count += count;
    }
  }

  std::map<Item, std::size_t> rank_;
  std::vector<Node> nodes_;
  std::map<Item, std::vector<std::size_t>> links_;
};

void mine(const FpTree& tree, const Itemset& suffix, std::size_t min_count, std::map<Itemset, std::size_t>& out) {
  for (const auto& [item, support] : tree.items()) {
    Itemset found = suffix;
    found.insert(std::upper_bound(found.begin(), found.end(), item), item);
    out.emplace(found, support);
    FpTree conditional(tree.conditional_base(item), min_count);
    if (!conditional.empty()) mine(conditional, found, min_count, out);
  }
}

}  // namespace

std::map<Itemset, std::size_t> frequent_itemsets(const std::vector<Transaction>& transactions, std::size_t min_count) {
  if (min_count < 1) throw DomainError("minimum support count must be at least 1");
  std::vector<WeightedTransaction> db;
  db.reserve(transactions.size());
  for (const auto& t : transactions) db.emplace_back(std::vector<Item>(t.begin(), t.end()), 1);
  std::map<Itemset, std::size_t> out;
  mine(FpTree(db, min_count), {}, min_count, out);
  return out;
}

int label_id(Item item) { return static_cast<int>(item / kSinkCategoryCount) + 1; }

SinkCategory label_category(Item item) { return kSinkCategories[item % kSinkCategoryCount]; }

std::string label_name(Item item) {
  return std::to_string(label_id(item)) + ":" + std::string(to_string(label_category(item)));
}

Transaction transaction_of(const risk::FlowMatrix& n) {
  Transaction t;
  for (SinkCategory sc : kSinkCategories) {
    for (int id = 1; id <= kVulnTypeCount; ++id) {
      if (n[index_of(sc)][id - 1] > 0) t.insert(label_item(id, sc));
    }
  }
  return t;
}

std::vector<AssociationRule> mine_rules(const std::vector<Transaction>& transactions, std::size_t min_support_apps,
                                        const risk::Fraction& min_conf) {
  if (min_support_apps < 1) throw DomainError("min_support_apps must be at least 1");
  if (min_conf <= risk::Fraction(0) || min_conf > risk::Fraction(1)) {
    throw DomainError("min_conf must lie in (0, 1]");
  }
  // Singletons at any support are needed for confidence denominators; the
  // joint pair must strictly exceed the app threshold.
  const auto frequent = frequent_itemsets(transactions, min_support_apps + 1);
  std::map<Item, std::size_t> single;
  for (const auto& t : transactions) {
    for (Item i : t) ++single[i];
  }
  std::vector<AssociationRule> rules;
  for (const auto& [set, joint] : frequent) {
    if (set.size() != 2) continue;
    for (int dir = 0; dir < 2; ++dir) {
      const Item a = set[dir], c = set[1 - dir];
      const std::size_t ante = single.at(a);
      risk::Fraction conf(static_cast<std::int64_t>(joint), static_cast<std::int64_t>(ante));
      if (conf > min_conf) rules.push_back({a, c, ante, joint, conf});
    }
  }
  std::sort(rules.begin(), rules.end(), [](const AssociationRule& x, const AssociationRule& y) {
    if (x.confidence != y.confidence) return x.confidence > y.confidence;
    if (x.joint_count != y.joint_count) return x.joint_count > y.joint_count;
    return std::pair{x.antecedent, x.consequent} < std::pair{y.antecedent, y.consequent};
  });
  return rules;
}

std::string rules_csv(const std::vector<AssociationRule>& rules) {
  std::string out = "antecedent,consequent,antecedent_apps,joint_apps,confidence\n";
  for (const auto& r : rules) {
    char conf[32];
    std::snprintf(conf, sizeof conf, "%.6f", r.confidence.to_double());
    out += label_name(r.antecedent) + "," + label_name(r.consequent) + "," + std::to_string(r.antecedent_count) + "," +
           std::to_string(r.joint_count) + "," + conf + "\n";
  }
  return out;
}

}  // namespace cryptorisk::fpgrowth

#include "cryptorisk/dataflow.hpp"

#include <algorithm>
#include <map>

#include "cryptorisk/error.hpp"
#include "detail/forward.hpp"

namespace cryptorisk::dataflow {

using namespace appir;
using nlohmann::json;

TaintConfig make_config(const Taxonomy& taxonomy, std::set<std::string> sources, int depth) {
  if (depth < 1) throw DomainError("taint depth K must be at least 1");
  TaintConfig cfg;
  cfg.sources = std::move(sources);
  cfg.sinks = taxonomy.catalog.sink_signatures();
  cfg.receiver_tainting = taxonomy.catalog.receiver_tainting();
  cfg.depth = depth;
  return cfg;
}

namespace {

// Sorted, duplicate-free set of source labels.
using Taint = std::vector<std::uint32_t>;

bool merge_into(Taint& into, const Taint& from) {
  if (from.empty()) return false;
  Taint merged;
  merged.reserve(into.size() + from.size());
  std::set_union(into.begin(), into.end(), from.begin(), from.end(), std::back_inserter(merged));
  if (merged.size() == into.size()) return false;
  into = std::move(merged);
  return true;
}

void add_label(Taint& t, std::uint32_t label) {
  auto it = std::lower_bound(t.begin(), t.end(), label);
  if (it == t.end() || *it != label) t.insert(it, label);
}

class TaintEngine {
 public:
  TaintEngine(const Program& program, const TaintConfig& cfg) : program_(program), cfg_(cfg) {
    if (cfg.depth < 1) throw DomainError("taint depth K must be at least 1");
    for (const MethodDef* m : program.methods()) {
      for (const auto& s : m->body) {
        const Call* c = s.as_call();
        if (c && cfg.sources.contains(c->callee)) {
          labels_.emplace(Loc{m->signature, s.id}, static_cast<std::uint32_t>(label_locs_.size()));
          label_locs_.push_back({m->signature, s.id});
        }
      }
    }
  }

  std::set<TaintFlow> run() {
    if (label_locs_.empty()) return {};
    do {
      changed_ = false;
      memo_.clear();
      for (const MethodDef* m : program_.methods()) analyze(*m, {}, std::vector<Taint>(entry_width(*m)));
    } while (changed_);

    std::set<TaintFlow> out;
    for (const auto& [label, sink] : flows_) out.insert({label_locs_[label], sink});
    return out;
  }

 private:
  using Context = std::vector<Loc>;
  using State = std::vector<Taint>;  // per local

  static std::size_t entry_width(const MethodDef& m) { return m.params.size() + (m.this_var ? 1 : 0); }

  // entry holds `this` (when present) followed by the parameters.
  Taint analyze(const MethodDef& m, const Context& ctx, const std::vector<Taint>& entry) {
    auto key = std::make_tuple(&m, ctx, entry);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    State init(m.vars.size());
    std::size_t k = 0;
    if (m.this_var) init[*m.this_var] = entry[k++];
    for (VarId p : m.params) init[p] = entry[k++];

    auto in = detail::solve_forward(
        m, std::move(init), [&](std::size_t i, const State& s) { return transfer(m, ctx, i, s); },
        [](State& into, const State& from) {
          bool changed = false;
          for (std::size_t v = 0; v < into.size(); ++v) changed |= merge_into(into[v], from[v]);
          return changed;
        });

    Taint ret;
    for (std::size_t i = 0; i < m.body.size(); ++i) {
      if (const auto* r = std::get_if<Return>(&m.body[i].op); r && r->value) merge_into(ret, in[i][*r->value]);
    }
    memo_.emplace(std::move(key), ret);
    return ret;
  }

  State transfer(const MethodDef& m, const Context& ctx, std::size_t i, const State& s) {
    State out = s;
    const Statement& st = m.body[i];
    if (const auto* a = std::get_if<Assign>(&st.op)) {
      out[a->dst] = s[a->src];
    } else if (const auto* c = std::get_if<Const>(&st.op)) {
      out[c->dst].clear();
    } else if (const auto* l = std::get_if<FieldLoad>(&st.op)) {
      auto it = fields_.find(l->field);
      out[l->dst] = it == fields_.end() ? Taint{} : it->second;
    } else if (const auto* f = std::get_if<FieldStore>(&st.op)) {
      changed_ |= merge_into(fields_[f->field], s[f->src]);
    } else if (const auto* call = std::get_if<Call>(&st.op)) {
      transfer_call(m, ctx, st.id, *call, s, out);
    }
    return out;
  }

  void transfer_call(const MethodDef& m, const Context& ctx, int stmt, const Call& c, const State& s, State& out) {
    const Loc loc{m.signature, stmt};
    Taint args;
    for (VarId a : c.args) merge_into(args, s[a]);
    Taint in = args;
    if (c.receiver) merge_into(in, s[*c.receiver]);

    if (cfg_.sinks.contains(c.callee)) {
      for (std::uint32_t label : in) changed_ |= flows_.emplace(label, loc).second;
    }

    Taint result = in;
    Taint receiver_gain = args;
    if (const MethodDef* callee = program_.find_method(c.callee);
        callee && static_cast<int>(ctx.size()) < cfg_.depth) {
      std::vector<Taint> entry;
      if (callee->this_var) entry.push_back(c.receiver ? s[*c.receiver] : Taint{});
      for (std::size_t k = 0; k < callee->params.size(); ++k) {
        entry.push_back(k < c.args.size() ? s[c.args[k]] : Taint{});
      }
      Context deeper = ctx;
      deeper.push_back(loc);
      merge_into(result, analyze(*callee, deeper, entry));
    }

    if (auto it = labels_.find(loc); it != labels_.end()) {
      add_label(result, it->second);
      if (!c.dst || cfg_.receiver_tainting.contains(c.callee)) add_label(receiver_gain, it->second);
    }
    if (c.dst) out[*c.dst] = std::move(result);
    if (c.receiver) merge_into(out[*c.receiver], receiver_gain);
  }

  const Program& program_;
  const TaintConfig& cfg_;
  std::map<Loc, std::uint32_t> labels_;
  std::vector<Loc> label_locs_;
  std::map<std::string, Taint, std::less<>> fields_;
  std::set<std::pair<std::uint32_t, Loc>> flows_;
  std::map<std::tuple<const MethodDef*, Context, std::vector<Taint>>, Taint> memo_;
  bool changed_ = false;
};

}  // namespace

std::set<TaintFlow> taint_connect(const Program& program, const TaintConfig& cfg) {
  return TaintEngine(program, cfg).run();
}

std::vector<std::string> unresolved_sources(const Program& program, const TaintConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& s : cfg.sources) {
    if (!program.find_method(s) && !program.is_external(s)) out.push_back(s);
  }
  return out;
}

std::set<std::string> refine_sources(std::string_view m, const Program& program, const Taxonomy& taxonomy,
                                     int depth) {
  const ApiKind kind = taxonomy.classify_api(m);
  if (kind == ApiKind::Unknown) {
    throw DomainError("cannot refine '" + std::string(m) + "': not a catalogued cryptographic API");
  }
  std::set<std::string> out{std::string(m)};
  if (kind == ApiKind::Dapi) return out;

  TaintConfig cfg;
  cfg.sources = out;
  cfg.sinks = taxonomy.catalog.signatures_of(ApiKind::Dapi);
  cfg.receiver_tainting = taxonomy.catalog.receiver_tainting();
  cfg.depth = depth;
  for (const auto& f : taint_connect(program, cfg)) out.insert(program.call_at(f.sink).callee);
  return out;
}

SinkCategory ds_track(const Program& program, const Loc& sink, const Taxonomy& taxonomy) {
  const Statement* st = program.statement_at(sink);
  const Call* call = st ? st->as_call() : nullptr;
  const ApiCatalogEntry* entry = call ? taxonomy.catalog.find(call->callee) : nullptr;
  if (!entry || !entry->is_sink()) {
    throw DomainError("location " + to_display(sink) + " is not a call of a catalogued sink");
  }
  const MethodDef& m = *program.find_method(sink.method);
  const std::size_t at = *m.index_of(sink.stmt);
  ReachingDefinitions rd(m);

  std::vector<SinkCategory> categories{*entry->default_sink_category};
  auto collect = [&](std::string_view type) {
    if (auto tag = taxonomy.catalog.type_tag(type)) categories.push_back(*tag);
  };

  std::set<std::pair<std::size_t, VarId>> seen;
  std::vector<std::pair<std::size_t, VarId>> work;
  auto push_uses = [&](std::size_t index, const std::vector<VarId>& vars) {
    for (VarId v : vars) work.emplace_back(index, v);
  };
  push_uses(at, st->used_vars());
  while (!work.empty()) {
    auto [index, v] = work.back();
    work.pop_back();
    if (!seen.insert({index, v}).second) continue;
    collect(m.vars[v].type);
    for (std::size_t d : rd.defs_before(index, v)) {
      if (d == ReachingDefinitions::kEntryDef) continue;
      const Statement& def = m.body[d];
      if (const auto* c = std::get_if<Const>(&def.op)) {
        collect(c->type);
      } else if (std::holds_alternative<Assign>(def.op) || std::holds_alternative<Call>(def.op) ||
                 std::holds_alternative<FieldLoad>(def.op)) {
        push_uses(d, def.used_vars());
      }
    }
  }
  return taxonomy.weights.most_sensitive(categories);
}

json to_json(const FlowRecord& f) {
  return {{"m", f.misuse.m},
          {"id", f.misuse.id},
          {"p", f.misuse.p},
          {"loc", appir::to_json(f.misuse.loc)},
          {"source", appir::to_json(f.source)},
          {"sink", appir::to_json(f.sink)},
          {"category", std::string(to_string(f.category))}};
}

Annotation annotate(std::vector<MisuseTuple> tuples, const Program& program, const Taxonomy& taxonomy, int depth) {
  std::map<std::set<std::string>, std::set<TaintFlow>> by_sources;
  std::map<std::string, std::set<std::string>, std::less<>> refined;
  std::map<Loc, SinkCategory> categories;
  const std::set<std::string> sinks = taxonomy.catalog.sink_signatures();
  const std::set<std::string> receiver_tainting = taxonomy.catalog.receiver_tainting();

  Annotation out;
  for (auto& t : tuples) {
    t.S.clear();
    const auto sites = call_sites_of(program, t.m);
    t.locatable = std::any_of(sites.begin(), sites.end(), [&](const Loc& l) { return l.method == t.p; });
    if (!t.locatable) continue;

    auto r = refined.find(t.m);
    if (r == refined.end()) {
      std::set<std::string> o = taxonomy.classify_api(t.m) == ApiKind::Unknown
                                    ? std::set<std::string>{t.m}
                                    : refine_sources(t.m, program, taxonomy, depth);
      r = refined.emplace(t.m, std::move(o)).first;
    }
    auto f = by_sources.find(r->second);
    if (f == by_sources.end()) {
      TaintConfig cfg{r->second, sinks, receiver_tainting, depth};
      f = by_sources.emplace(r->second, taint_connect(program, cfg)).first;
    }

    std::set<Loc> reached;
    for (const auto& flow : f->second) {
      if (flow.source.method != t.p) continue;
      auto c = categories.find(flow.sink);
      if (c == categories.end()) c = categories.emplace(flow.sink, ds_track(program, flow.sink, taxonomy)).first;
      reached.insert(flow.sink);
      out.flows.push_back({key_of(t), flow.source, flow.sink, c->second});
    }
    for (const Loc& l : reached) t.S.push_back(categories.at(l));
  }
  out.tuples = std::move(tuples);
  return out;
}

}  // namespace cryptorisk::dataflow

#include "taint_oracle.hpp"

#include <map>
#include <tuple>
#include <vector>

namespace testsupport {

using namespace cryptorisk::appir;
using cryptorisk::dataflow::TaintConfig;
using cryptorisk::dataflow::TaintFlow;

namespace {

using Labels = std::set<Loc>;
using Fields = std::map<std::string, Labels>;

struct Outcome {
  Labels ret;
  Fields fields;
  auto operator<=>(const Outcome&) const = default;
};

class Enumerator {
 public:
  Enumerator(const Program& p, const TaintConfig& cfg) : program_(p), cfg_(cfg) {}

  std::set<TaintFlow> run() {
    for (const MethodDef* m : program_.methods()) {
      std::vector<Labels> entry(m->vars.size());
      execute(*m, entry, {});
    }
    return flows_;
  }

 private:
  using Key = std::tuple<const MethodDef*, std::vector<Labels>, Fields>;

  std::set<Outcome> execute(const MethodDef& m, const std::vector<Labels>& vars, const Fields& fields) {
    Key key{&m, vars, fields};
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    std::set<Outcome> out;
    walk(m, 0, vars, fields, out);
    memo_.emplace(std::move(key), out);
    return out;
  }

  static std::size_t position_of(const MethodDef& m, int id) {
    for (std::size_t i = 0; i < m.body.size(); ++i) {
      if (m.body[i].id == id) return i;
    }
    return m.body.size();
  }

  void walk(const MethodDef& m, std::size_t pc, std::vector<Labels> vars, Fields fields, std::set<Outcome>& out) {
    while (true) {
      if (pc >= m.body.size()) {
        out.insert({{}, fields});
        return;
      }
      const Statement& st = m.body[pc];
      if (const auto* a = std::get_if<Assign>(&st.op)) {
        vars[a->dst] = vars[a->src];
      } else if (const auto* c = std::get_if<Const>(&st.op)) {
        vars[c->dst].clear();
      } else if (const auto* l = std::get_if<FieldLoad>(&st.op)) {
        vars[l->dst] = fields[l->field];
      } else if (const auto* s = std::get_if<FieldStore>(&st.op)) {
        if (s->base) {
          fields[s->field].insert(vars[s->src].begin(), vars[s->src].end());
        } else {
          fields[s->field] = vars[s->src];
        }
      } else if (const auto* b = std::get_if<Branch>(&st.op)) {
        const std::size_t target = position_of(m, b->target);
        if (b->cond) walk(m, pc + 1, vars, fields, out);
        pc = target;
        continue;
      } else if (const auto* r = std::get_if<Return>(&st.op)) {
        out.insert({r->value ? vars[*r->value] : Labels{}, fields});
        return;
      } else if (const auto* call = std::get_if<Call>(&st.op)) {
        const Loc loc{m.signature, st.id};
        Labels args;
        for (VarId a : call->args) args.insert(vars[a].begin(), vars[a].end());
        Labels in = args;
        if (call->receiver) in.insert(vars[*call->receiver].begin(), vars[*call->receiver].end());
        if (cfg_.sinks.contains(call->callee)) {
          for (const Loc& label : in) flows_.insert({label, loc});
        }

        if (const MethodDef* callee = program_.find_method(call->callee)) {
          std::vector<Labels> entry(callee->vars.size());
          if (callee->this_var && call->receiver) entry[*callee->this_var] = vars[*call->receiver];
          for (std::size_t k = 0; k < callee->params.size() && k < call->args.size(); ++k) {
            entry[callee->params[k]] = vars[call->args[k]];
          }
          const auto outcomes = execute(*callee, entry, fields);
          for (const Outcome& o : outcomes) {
            auto next = vars;
            if (call->dst) next[*call->dst] = o.ret;
            walk(m, pc + 1, std::move(next), o.fields, out);
          }
          return;
        }

        Labels result = in;
        Labels receiver_gain = args;
        if (cfg_.sources.contains(call->callee)) {
          result.insert(loc);
          if (!call->dst || cfg_.receiver_tainting.contains(call->callee)) receiver_gain.insert(loc);
        }
        if (call->receiver) vars[*call->receiver].insert(receiver_gain.begin(), receiver_gain.end());
        if (call->dst) vars[*call->dst] = result;
      }
      ++pc;
    }
  }

  const Program& program_;
  const TaintConfig& cfg_;
  std::set<TaintFlow> flows_;
  std::map<Key, std::set<Outcome>> memo_;
};

}  // namespace

std::set<TaintFlow> oracle_flows(const Program& program, const TaintConfig& cfg) {
  return Enumerator(program, cfg).run();
}

}  // namespace testsupport

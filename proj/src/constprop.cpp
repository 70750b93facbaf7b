#include "cryptorisk/appir.hpp"
#include "cryptorisk/error.hpp"
#include "detail/forward.hpp"

namespace cryptorisk::appir {

using detail::solve_forward;

// ---------------------------------------------------------------------------
// Reaching definitions

ReachingDefinitions::ReachingDefinitions(const MethodDef& method) {
  using State = std::vector<std::set<std::size_t>>;
  State entry(method.vars.size());
  if (method.this_var) entry[*method.this_var].insert(kEntryDef);
  for (VarId p : method.params) entry[p].insert(kEntryDef);

  in_ = solve_forward(
      method, entry,
      [&](std::size_t i, const State& s) {
        State out = s;
        if (auto d = method.body[i].defined_var()) out[*d] = {i};
        return out;
      },
      [](State& into, const State& from) {
        bool changed = false;
        for (std::size_t v = 0; v < into.size(); ++v) {
          for (std::size_t d : from[v]) changed |= into[v].insert(d).second;
        }
        return changed;
      });
}

const std::set<std::size_t>& ReachingDefinitions::defs_before(std::size_t index, VarId v) const {
  return in_.at(index).at(v);
}

// ---------------------------------------------------------------------------
// Constant propagation

namespace {

using Value = ConstantPropagation::Value;
using Kind = Value::Kind;

Value join_value(const Value& a, const Value& b) {
  if (a.kind == Kind::Undefined) return b;
  if (b.kind == Kind::Undefined) return a;
  if (a.kind == Kind::Constant && b.kind == Kind::Constant && a.literal == b.literal) return a;
  return {Kind::NonConstant, {}};
}

bool is_byte_conversion(std::string_view callee) {
  return callee.starts_with("java.lang.String.getBytes(") || callee == "java.lang.String.toCharArray()";
}

}  // namespace

ConstantPropagation::ConstantPropagation(const MethodDef& method) {
  using State = std::vector<Value>;
  State entry(method.vars.size());
  if (method.this_var) entry[*method.this_var] = {Kind::NonConstant, {}};
  for (VarId p : method.params) entry[p] = {Kind::NonConstant, {}};

  in_ = solve_forward(
      method, entry,
      [&](std::size_t i, const State& s) {
        State out = s;
        const Statement& st = method.body[i];
        if (const auto* a = std::get_if<Assign>(&st.op)) {
          out[a->dst] = s[a->src];
        } else if (const auto* c = std::get_if<Const>(&st.op)) {
          out[c->dst] = {Kind::Constant, c->value};
        } else if (const auto* call = std::get_if<Call>(&st.op)) {
          if (call->dst) {
            // A byte/char view of a constant string is still a hard-coded value.
            if (call->receiver && is_byte_conversion(call->callee) && s[*call->receiver].kind == Kind::Constant) {
              out[*call->dst] = s[*call->receiver];
            } else {
              out[*call->dst] = {Kind::NonConstant, {}};
            }
          }
        } else if (const auto* l = std::get_if<FieldLoad>(&st.op)) {
          out[l->dst] = {Kind::NonConstant, {}};
        }
        return out;
      },
      [](State& into, const State& from) {
        bool changed = false;
        for (std::size_t v = 0; v < into.size(); ++v) {
          Value j = join_value(into[v], from[v]);
          if (!(j == into[v])) {
            into[v] = std::move(j);
            changed = true;
          }
        }
        return changed;
      });
}

std::optional<Literal> ConstantPropagation::value_before(std::size_t index, VarId v) const {
  const Value& val = in_.at(index).at(v);
  if (val.kind != Kind::Constant) return std::nullopt;
  return val.literal;
}

std::optional<Literal> constant_arg(const Program& program, const Loc& call, std::size_t index) {
  const Call& c = program.call_at(call);
  if (index >= c.args.size()) {
    throw DomainError("argument " + std::to_string(index) + " out of range at " + to_display(call));
  }
  const MethodDef& m = *program.find_method(call.method);
  ConstantPropagation cp(m);
  return cp.value_before(*m.index_of(call.stmt), c.args[index]);
}

}  // namespace cryptorisk::appir

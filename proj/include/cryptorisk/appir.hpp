#pragma once

// CEIR: a minimal typed three-address program representation. One JSON
// document per app; see docs/ceir.md for the schema.

#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace cryptorisk::appir {

inline constexpr int kCeirVersion = 1;

using VarId = std::uint32_t;

struct Variable {
  std::string name;
  std::string type;  // semantic (Java) type name

  bool operator==(const Variable&) const = default;
};

struct Null {
  bool operator==(const Null&) const = default;
};

/// Constant operand. Integer arrays stand in for byte[]/char[] initializers.
using Literal = std::variant<Null, bool, std::int64_t, double, std::string, std::vector<std::int64_t>>;

std::string to_display(const Literal& lit);
nlohmann::json literal_to_json(const Literal& lit);
Literal literal_from_json(const nlohmann::json& j);

struct Assign {
  VarId dst;
  VarId src;
  bool operator==(const Assign&) const = default;
};

struct Const {
  VarId dst;
  Literal value;
  std::string type;
  bool operator==(const Const&) const = default;
};

/// Constructor calls use the `<init>` method name; the constructed object is
/// bound to dst.
struct Call {
  std::optional<VarId> dst;
  std::string callee;
  std::optional<VarId> receiver;
  std::vector<VarId> args;
  bool operator==(const Call&) const = default;
};

/// Fields are named "Class.field"; a missing base denotes a static field.
struct FieldLoad {
  VarId dst;
  std::optional<VarId> base;
  std::string field;
  bool operator==(const FieldLoad&) const = default;
};

struct FieldStore {
  std::optional<VarId> base;
  std::string field;
  VarId src;
  bool operator==(const FieldStore&) const = default;
};

/// With a condition both the fall-through and the target are successors;
/// without one it is an unconditional jump.
struct Branch {
  std::optional<VarId> cond;
  int target;
  bool operator==(const Branch&) const = default;
};

struct Return {
  std::optional<VarId> value;
  bool operator==(const Return&) const = default;
};

using Op = std::variant<Assign, Const, Call, FieldLoad, FieldStore, Branch, Return>;

struct Statement {
  int id;
  Op op;
  bool operator==(const Statement&) const = default;

  const Call* as_call() const { return std::get_if<Call>(&op); }
  /// The local written by this statement, if any.
  std::optional<VarId> defined_var() const;
  /// Locals read by this statement, in operand order.
  std::vector<VarId> used_vars() const;
};

struct MethodDef {
  std::string signature;
  std::string return_type = "void";
  bool is_static = false;
  std::vector<Variable> vars;       // this (if any), params, then locals
  std::optional<VarId> this_var;
  std::vector<VarId> params;
  std::vector<Statement> body;

  bool operator==(const MethodDef&) const = default;

  std::string_view class_name() const;
  std::string_view name() const;

  /// Position of the statement with the given id in body.
  std::optional<std::size_t> index_of(int stmt_id) const;
  std::optional<VarId> var_named(std::string_view name) const;
  const Variable& var(VarId v) const { return vars.at(v); }

  /// Control-flow successors of body[index], as body positions.
  std::vector<std::size_t> successors(std::size_t index) const;
};

struct ClassDef {
  std::string name;
  std::string super_class;
  std::vector<std::string> interfaces;
  std::vector<Variable> fields;
  std::vector<MethodDef> methods;

  bool operator==(const ClassDef&) const = default;
};

/// A code location: enclosing method signature and statement id.
struct Loc {
  std::string method;
  int stmt = 0;

  auto operator<=>(const Loc&) const = default;
};

nlohmann::json to_json(const Loc& loc);
Loc loc_from_json(const nlohmann::json& j);
std::string to_display(const Loc& loc);

class Program {
 public:
  Program() = default;
  Program(std::string app_id, std::vector<ClassDef> classes, std::vector<std::string> externals,
          std::vector<std::string> entry_methods);

  // method_order_ points into classes_, so copies rebuild the index.
  Program(const Program& other);
  Program& operator=(const Program& other);
  Program(Program&&) noexcept = default;
  Program& operator=(Program&&) noexcept = default;

  const std::string& app_id() const { return app_id_; }
  const std::vector<ClassDef>& classes() const { return classes_; }
  const std::vector<std::string>& externals() const { return externals_; }
  const std::vector<std::string>& entry_methods() const { return entry_methods_; }

  /// Every defined method in declaration order.
  const std::vector<const MethodDef*>& methods() const { return method_order_; }
  const MethodDef* find_method(std::string_view signature) const;
  const ClassDef* find_class(std::string_view name) const;
  const ClassDef& class_of(const MethodDef& m) const;
  bool is_external(std::string_view signature) const;

  /// Declaration rank of a method, used for deterministic ordering.
  std::size_t method_rank(std::string_view signature) const;

  const Statement* statement_at(const Loc& loc) const;
  /// Throws DomainError unless loc names a Call statement.
  const Call& call_at(const Loc& loc) const;

  bool operator==(const Program& other) const;

 private:
  void reindex();

  std::string app_id_;
  std::vector<ClassDef> classes_;
  std::vector<std::string> externals_;
  std::vector<std::string> entry_methods_;
  std::vector<const MethodDef*> method_order_;
  std::map<std::string, std::size_t, std::less<>> method_rank_;
  std::set<std::string, std::less<>> external_set_;
};

/// Validates and builds a Program. All violations are reported together in a
/// ParseError, each naming its class/method/statement.
Program parse_program(const nlohmann::json& doc, const std::string& source = "");
Program parse_program_text(std::string_view text, const std::string& source = "");
Program load_program(const std::string& path);

nlohmann::json to_json(const Program& program);

/// Every Loc whose statement calls `signature`, in declaration order.
std::vector<Loc> call_sites_of(const Program& program, std::string_view signature);

/// Reaching definitions over one method. A definition site is a body index or
/// kEntryDef for parameters and `this`.
class ReachingDefinitions {
 public:
  static constexpr std::size_t kEntryDef = std::numeric_limits<std::size_t>::max();

  explicit ReachingDefinitions(const MethodDef& method);

  /// Definitions of v that reach the point just before body[index].
  const std::set<std::size_t>& defs_before(std::size_t index, VarId v) const;

 private:
  std::vector<std::vector<std::set<std::size_t>>> in_;  // [index][var]
};

/// Intra-procedural constant propagation on the flat lattice
/// undefined < literal < non-constant. Loops iterate to a fixpoint; a join of
/// two different literals goes straight to non-constant.
class ConstantPropagation {
 public:
  explicit ConstantPropagation(const MethodDef& method);

  /// The literal held by v just before body[index]; nullopt when not a
  /// compile-time constant.
  std::optional<Literal> value_before(std::size_t index, VarId v) const;

  struct Value {
    enum class Kind { Undefined, Constant, NonConstant } kind = Kind::Undefined;
    Literal literal;
    bool operator==(const Value&) const = default;
  };

 private:
  std::vector<std::vector<Value>> in_;  // [index][var]
};

/// Constant value of argument `index` at the call `call`, or nullopt when
/// the argument is not a compile-time constant. Throws DomainError for a
/// location that is not a call or an index past its arguments.
std::optional<Literal> constant_arg(const Program& program, const Loc& call, std::size_t index);

}  // namespace cryptorisk::appir

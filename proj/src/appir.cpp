#include "cryptorisk/appir.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cryptorisk/error.hpp"

namespace cryptorisk::appir {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Literals and locations

std::string to_display(const Literal& lit) {
  struct Visitor {
    std::string operator()(Null) const { return "null"; }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const {
      std::ostringstream os;
      os << d;
      return os.str();
    }
    std::string operator()(const std::string& s) const { return "\"" + s + "\""; }
    std::string operator()(const std::vector<std::int64_t>& a) const {
      std::string out = "{";
      for (std::size_t i = 0; i < a.size(); ++i) out += (i ? "," : "") + std::to_string(a[i]);
      return out + "}";
    }
  };
  return std::visit(Visitor{}, lit);
}

json literal_to_json(const Literal& lit) {
  struct Visitor {
    json operator()(Null) const { return nullptr; }
    json operator()(bool b) const { return b; }
    json operator()(std::int64_t i) const { return i; }
    json operator()(double d) const { return d; }
    json operator()(const std::string& s) const { return s; }
    json operator()(const std::vector<std::int64_t>& a) const { return a; }
  };
  return std::visit(Visitor{}, lit);
}

Literal literal_from_json(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return Null{};
    case json::value_t::boolean: return j.get<bool>();
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return j.get<std::int64_t>();
    case json::value_t::number_float: return j.get<double>();
    case json::value_t::string: return j.get<std::string>();
    case json::value_t::array: return j.get<std::vector<std::int64_t>>();
    default: throw DomainError("unsupported literal " + j.dump());
  }
}

namespace {

std::string default_literal_type(const Literal& lit) {
  struct Visitor {
    std::string operator()(Null) const { return "null"; }
    std::string operator()(bool) const { return "boolean"; }
    std::string operator()(std::int64_t) const { return "int"; }
    std::string operator()(double) const { return "double"; }
    std::string operator()(const std::string&) const { return "java.lang.String"; }
    std::string operator()(const std::vector<std::int64_t>&) const { return "byte[]"; }
  };
  return std::visit(Visitor{}, lit);
}

}  // namespace

json to_json(const Loc& loc) { return {{"method", loc.method}, {"stmt", loc.stmt}}; }

Loc loc_from_json(const json& j) { return {j.at("method").get<std::string>(), j.at("stmt").get<int>()}; }

std::string to_display(const Loc& loc) { return loc.method + "#" + std::to_string(loc.stmt); }

// ---------------------------------------------------------------------------
// Statements and methods

std::optional<VarId> Statement::defined_var() const {
  if (const auto* a = std::get_if<Assign>(&op)) return a->dst;
  if (const auto* c = std::get_if<Const>(&op)) return c->dst;
  if (const auto* c = std::get_if<Call>(&op)) return c->dst;
  if (const auto* l = std::get_if<FieldLoad>(&op)) return l->dst;
  return std::nullopt;
}

std::vector<VarId> Statement::used_vars() const {
  std::vector<VarId> out;
  if (const auto* a = std::get_if<Assign>(&op)) {
    out.push_back(a->src);
  } else if (const auto* c = std::get_if<Call>(&op)) {
    if (c->receiver) out.push_back(*c->receiver);
    out.insert(out.end(), c->args.begin(), c->args.end());
  } else if (const auto* l = std::get_if<FieldLoad>(&op)) {
    if (l->base) out.push_back(*l->base);
  } else if (const auto* s = std::get_if<FieldStore>(&op)) {
    if (s->base) out.push_back(*s->base);
    out.push_back(s->src);
  } else if (const auto* b = std::get_if<Branch>(&op)) {
    if (b->cond) out.push_back(*b->cond);
  } else if (const auto* r = std::get_if<Return>(&op)) {
    if (r->value) out.push_back(*r->value);
  }
  return out;
}

std::string_view MethodDef::class_name() const {
  std::string_view sig = signature;
  const auto paren = sig.find('(');
  const auto dot = sig.rfind('.', paren);
  return dot == std::string_view::npos ? std::string_view{} : sig.substr(0, dot);
}

std::string_view MethodDef::name() const {
  std::string_view sig = signature;
  const auto paren = sig.find('(');
  const auto dot = sig.rfind('.', paren);
  return dot == std::string_view::npos ? sig.substr(0, paren) : sig.substr(dot + 1, paren - dot - 1);
}

std::optional<std::size_t> MethodDef::index_of(int stmt_id) const {
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i].id == stmt_id) return i;
  }
  return std::nullopt;
}

std::optional<VarId> MethodDef::var_named(std::string_view n) const {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].name == n) return static_cast<VarId>(i);
  }
  return std::nullopt;
}

std::vector<std::size_t> MethodDef::successors(std::size_t index) const {
  const Statement& s = body.at(index);
  std::vector<std::size_t> out;
  if (std::holds_alternative<Return>(s.op)) return out;
  if (const auto* b = std::get_if<Branch>(&s.op)) {
    if (b->cond && index + 1 < body.size()) out.push_back(index + 1);
    if (auto t = index_of(b->target); t && (out.empty() || out.front() != *t)) out.push_back(*t);
    return out;
  }
  if (index + 1 < body.size()) out.push_back(index + 1);
  return out;
}

// ---------------------------------------------------------------------------
// Program

Program::Program(std::string app_id, std::vector<ClassDef> classes, std::vector<std::string> externals,
                 std::vector<std::string> entry_methods)
    : app_id_(std::move(app_id)),
      classes_(std::move(classes)),
      externals_(std::move(externals)),
      entry_methods_(std::move(entry_methods)) {
  reindex();
}

Program::Program(const Program& other)
    : app_id_(other.app_id_),
      classes_(other.classes_),
      externals_(other.externals_),
      entry_methods_(other.entry_methods_) {
  reindex();
}

Program& Program::operator=(const Program& other) {
  if (this != &other) {
    app_id_ = other.app_id_;
    classes_ = other.classes_;
    externals_ = other.externals_;
    entry_methods_ = other.entry_methods_;
    reindex();
  }
  return *this;
}

void Program::reindex() {
  method_order_.clear();
  method_rank_.clear();
  for (const auto& c : classes_) {
    for (const auto& m : c.methods) {
      method_rank_.emplace(m.signature, method_order_.size());
      method_order_.push_back(&m);
    }
  }
  external_set_ = {externals_.begin(), externals_.end()};
}

const MethodDef* Program::find_method(std::string_view signature) const {
  auto it = method_rank_.find(signature);
  return it == method_rank_.end() ? nullptr : method_order_[it->second];
}

const ClassDef* Program::find_class(std::string_view name) const {
  for (const auto& c : classes_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const ClassDef& Program::class_of(const MethodDef& m) const {
  for (const auto& c : classes_) {
    for (const auto& cm : c.methods) {
      if (&cm == &m) return c;
    }
  }
  throw DomainError("method '" + m.signature + "' does not belong to this program");
}

bool Program::is_external(std::string_view signature) const { return external_set_.contains(signature); }

std::size_t Program::method_rank(std::string_view signature) const {
  auto it = method_rank_.find(signature);
  return it == method_rank_.end() ? method_order_.size() : it->second;
}

const Statement* Program::statement_at(const Loc& loc) const {
  const MethodDef* m = find_method(loc.method);
  if (!m) return nullptr;
  auto idx = m->index_of(loc.stmt);
  return idx ? &m->body[*idx] : nullptr;
}

const Call& Program::call_at(const Loc& loc) const {
  const Statement* s = statement_at(loc);
  if (!s) throw DomainError("location " + to_display(loc) + " does not resolve");
  const Call* c = s->as_call();
  if (!c) throw DomainError("location " + to_display(loc) + " is not a call");
  return *c;
}

bool Program::operator==(const Program& other) const {
  return app_id_ == other.app_id_ && classes_ == other.classes_ && externals_ == other.externals_ &&
         entry_methods_ == other.entry_methods_;
}

std::vector<Loc> call_sites_of(const Program& program, std::string_view signature) {
  std::vector<Loc> out;
  for (const MethodDef* m : program.methods()) {
    for (const auto& s : m->body) {
      if (const Call* c = s.as_call(); c && c->callee == signature) out.push_back({m->signature, s.id});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class MethodParser {
 public:
  MethodParser(const std::string& class_name, const json& doc, std::vector<std::string>& errors)
      : class_name_(class_name), doc_(doc), errors_(errors) {}

  std::optional<MethodDef> parse() {
    MethodDef m;
    if (!doc_.is_object() || !doc_.contains("signature") || !doc_["signature"].is_string()) {
      error("method without a string 'signature'");
      return std::nullopt;
    }
    m.signature = doc_["signature"].get<std::string>();
    where_ = "method " + m.signature;
    const auto paren = m.signature.find('(');
    if (paren == std::string::npos || m.signature.back() != ')') {
      error("signature must have the form Class.name(types)");
    } else if (m.class_name() != class_name_) {
      error("signature is not declared by class " + class_name_);
    }
    m.return_type = doc_.value("returns", std::string("void"));
    m.is_static = doc_.value("static", false);

    if (!m.is_static) {
      m.this_var = add_var(m, {"this", class_name_});
    }
    for (const auto& p : doc_.value("params", json::array())) {
      if (auto v = parse_variable(p, "param")) {
        if (auto id = add_var(m, *v)) m.params.push_back(*id);
      }
    }
    for (const auto& l : doc_.value("locals", json::array())) {
      if (auto v = parse_variable(l, "local")) add_var(m, *v);
    }

    std::set<int> ids;
    const json body = doc_.value("body", json::array());
    if (!body.is_array()) {
      error("'body' must be an array");
      return m;
    }
    for (const auto& s : body) {
      if (auto stmt = parse_statement(m, s)) {
        if (!ids.insert(stmt->id).second) {
          error("duplicate statement id " + std::to_string(stmt->id));
        }
        m.body.push_back(std::move(*stmt));
      }
    }
    for (const auto& s : m.body) {
      if (const auto* b = std::get_if<Branch>(&s.op); b && !ids.contains(b->target)) {
        error("stmt " + std::to_string(s.id) + ": branch target " + std::to_string(b->target) + " out of range");
      }
    }
    return m;
  }

 private:
  void error(const std::string& msg) { errors_.push_back((where_.empty() ? "" : where_ + ": ") + msg); }

  std::optional<Variable> parse_variable(const json& j, const char* what) {
    if (!j.is_object() || !j.contains("name") || !j.contains("type") || !j["name"].is_string() ||
        !j["type"].is_string()) {
      error(std::string(what) + " entries need string 'name' and 'type'");
      return std::nullopt;
    }
    return Variable{j["name"].get<std::string>(), j["type"].get<std::string>()};
  }

  std::optional<VarId> add_var(MethodDef& m, Variable v) {
    if (m.var_named(v.name)) {
      error("local '" + v.name + "' declared twice");
      return std::nullopt;
    }
    m.vars.push_back(std::move(v));
    return static_cast<VarId>(m.vars.size() - 1);
  }

  std::optional<VarId> operand(const MethodDef& m, const json& s, const char* key, const std::string& at) {
    if (!s.contains(key)) {
      error(at + ": missing operand '" + key + "'");
      return std::nullopt;
    }
    return resolve(m, s[key], at);
  }

  std::optional<VarId> optional_operand(const MethodDef& m, const json& s, const char* key, const std::string& at,
                                        bool& ok) {
    if (!s.contains(key) || s[key].is_null()) return std::nullopt;
    auto v = resolve(m, s[key], at);
    ok = ok && v.has_value();
    return v;
  }

  std::optional<VarId> resolve(const MethodDef& m, const json& name, const std::string& at) {
    if (!name.is_string()) {
      error(at + ": operand must be a local name");
      return std::nullopt;
    }
    auto v = m.var_named(name.get<std::string>());
    if (!v) error(at + ": undeclared local '" + name.get<std::string>() + "'");
    return v;
  }

  std::optional<Statement> parse_statement(const MethodDef& m, const json& s) {
    if (!s.is_object() || !s.contains("id") || !s["id"].is_number_integer() || !s.contains("op") ||
        !s["op"].is_string()) {
      error("statement needs integer 'id' and string 'op'");
      return std::nullopt;
    }
    const int id = s["id"].get<int>();
    const std::string op = s["op"].get<std::string>();
    const std::string at = "stmt " + std::to_string(id);
    bool ok = true;
    auto need = [&](const char* key) {
      auto v = operand(m, s, key, at);
      ok = ok && v.has_value();
      return v.value_or(0);
    };
    auto text = [&](const char* key) -> std::string {
      if (!s.contains(key) || !s[key].is_string()) {
        error(at + ": missing string '" + key + "'");
        ok = false;
        return {};
      }
      return s[key].get<std::string>();
    };

    Statement stmt{id, Return{}};
    if (op == "assign") {
      Assign a{};
      a.dst = need("dst");
      a.src = need("src");
      stmt.op = a;
    } else if (op == "const") {
      Const c{};
      c.dst = need("dst");
      if (!s.contains("value")) {
        error(at + ": const without 'value'");
        ok = false;
      } else {
        try {
          c.value = literal_from_json(s["value"]);
        } catch (const std::exception& e) {
          error(at + ": " + e.what());
          ok = false;
        }
      }
      c.type = s.contains("type") && s["type"].is_string() ? s["type"].get<std::string>() : default_literal_type(c.value);
      stmt.op = c;
    } else if (op == "call") {
      Call c;
      c.callee = text("callee");
      c.dst = optional_operand(m, s, "dst", at, ok);
      c.receiver = optional_operand(m, s, "receiver", at, ok);
      const json args = s.value("args", json::array());
      if (!args.is_array()) {
        error(at + ": 'args' must be an array");
        ok = false;
      } else {
        for (const auto& a : args) {
          auto v = resolve(m, a, at);
          ok = ok && v.has_value();
          c.args.push_back(v.value_or(0));
        }
      }
      callees_.emplace_back(c.callee, at);
      stmt.op = c;
    } else if (op == "load") {
      FieldLoad l{};
      l.dst = need("dst");
      l.base = optional_operand(m, s, "base", at, ok);
      l.field = text("field");
      stmt.op = l;
    } else if (op == "store") {
      FieldStore st{};
      st.base = optional_operand(m, s, "base", at, ok);
      st.field = text("field");
      st.src = need("src");
      stmt.op = st;
    } else if (op == "branch") {
      Branch b{};
      b.cond = optional_operand(m, s, "cond", at, ok);
      if (!s.contains("target") || !s["target"].is_number_integer()) {
        error(at + ": branch without integer 'target'");
        ok = false;
      } else {
        b.target = s["target"].get<int>();
      }
      stmt.op = b;
    } else if (op == "return") {
      Return r;
      r.value = optional_operand(m, s, "value", at, ok);
      stmt.op = r;
    } else {
      error(at + ": unknown op '" + op + "'");
      return std::nullopt;
    }
    if (!ok) return std::nullopt;
    return stmt;
  }

 public:
  std::vector<std::pair<std::string, std::string>> callees_;  // (callee, stmt) for resolution
  std::string where_;

 private:
  const std::string& class_name_;
  const json& doc_;
  std::vector<std::string>& errors_;
};

}  // namespace

Program parse_program(const json& doc, const std::string& source) {
  std::vector<std::string> errors;
  if (!doc.is_object()) throw ParseError(source, {"CEIR document must be a JSON object"});
  if (!doc.contains("ceir_version")) {
    errors.push_back("missing 'ceir_version'");
  } else if (!doc["ceir_version"].is_number_integer() || doc["ceir_version"].get<int>() != kCeirVersion) {
    errors.push_back("unsupported ceir_version " + doc["ceir_version"].dump() + " (expected " +
                     std::to_string(kCeirVersion) + ")");
  }
  std::string app = doc.value("app", std::string{});

  std::vector<ClassDef> classes;
  std::vector<std::pair<std::string, std::string>> callees;  // (callee, location)
  std::set<std::string> signatures;
  std::set<std::string> class_names;

  const json class_docs = doc.value("classes", json::array());
  if (!class_docs.is_array()) errors.push_back("'classes' must be an array");
  for (const auto& cd : class_docs.is_array() ? class_docs : json::array()) {
    if (!cd.is_object() || !cd.contains("name") || !cd["name"].is_string()) {
      errors.push_back("class without a string 'name'");
      continue;
    }
    ClassDef c;
    c.name = cd["name"].get<std::string>();
    if (!class_names.insert(c.name).second) errors.push_back("class " + c.name + " declared twice");
    c.super_class = cd.value("super", std::string("java.lang.Object"));
    c.interfaces = cd.value("interfaces", std::vector<std::string>{});
    for (const auto& f : cd.value("fields", json::array())) {
      if (!f.is_object() || !f.contains("name") || !f.contains("type")) {
        errors.push_back("class " + c.name + ": field entries need 'name' and 'type'");
        continue;
      }
      c.fields.push_back({f["name"].get<std::string>(), f["type"].get<std::string>()});
    }
    for (const auto& md : cd.value("methods", json::array())) {
      MethodParser mp(c.name, md, errors);
      auto m = mp.parse();
      if (!m) continue;
      for (auto& [callee, at] : mp.callees_) callees.emplace_back(callee, "method " + m->signature + ": " + at);
      if (!signatures.insert(m->signature).second) {
        errors.push_back("method " + m->signature + " defined twice");
        continue;
      }
      c.methods.push_back(std::move(*m));
    }
    classes.push_back(std::move(c));
  }

  std::vector<std::string> externals = doc.value("externals", std::vector<std::string>{});
  const std::set<std::string> external_set(externals.begin(), externals.end());
  for (const auto& e : externals) {
    if (signatures.contains(e)) errors.push_back("external " + e + " is also defined in the program");
  }
  for (const auto& [callee, at] : callees) {
    if (!signatures.contains(callee) && !external_set.contains(callee)) {
      errors.push_back(at + ": callee " + callee + " is neither defined nor declared external");
    }
  }
  std::vector<std::string> entries = doc.value("entry_methods", std::vector<std::string>{});
  for (const auto& e : entries) {
    if (!signatures.contains(e)) errors.push_back("entry method " + e + " is not defined");
  }

  if (!errors.empty()) throw ParseError(source, std::move(errors));
  return Program(std::move(app), std::move(classes), std::move(externals), std::move(entries));
}

Program parse_program_text(std::string_view text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, {std::string("malformed JSON: ") + e.what()});
  }
  return parse_program(doc, source);
}

Program load_program(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open CEIR file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  Program p = parse_program_text(buf.str(), path);
  if (p.app_id().empty()) {
    // Default the app id to the file stem ("foo.ceir.json" -> "foo").
    std::string stem = path.substr(path.find_last_of('/') + 1);
    stem = stem.substr(0, stem.find('.'));
    p = Program(stem, p.classes(), p.externals(), p.entry_methods());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json statement_to_json(const MethodDef& m, const Statement& s) {
  auto name = [&](VarId v) { return m.vars.at(v).name; };
  json j{{"id", s.id}};
  std::visit(
      [&](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, Assign>) {
          j["op"] = "assign";
          j["dst"] = name(op.dst);
          j["src"] = name(op.src);
        } else if constexpr (std::is_same_v<T, Const>) {
          j["op"] = "const";
          j["dst"] = name(op.dst);
          j["value"] = literal_to_json(op.value);
          j["type"] = op.type;
        } else if constexpr (std::is_same_v<T, Call>) {
          j["op"] = "call";
          if (op.dst) j["dst"] = name(*op.dst);
          j["callee"] = op.callee;
          if (op.receiver) j["receiver"] = name(*op.receiver);
          json args = json::array();
          for (VarId a : op.args) args.push_back(name(a));
          j["args"] = args;
        } else if constexpr (std::is_same_v<T, FieldLoad>) {
          j["op"] = "load";
          j["dst"] = name(op.dst);
          if (op.base) j["base"] = name(*op.base);
          j["field"] = op.field;
        } else if constexpr (std::is_same_v<T, FieldStore>) {
          j["op"] = "store";
          if (op.base) j["base"] = name(*op.base);
          j["field"] = op.field;
          j["src"] = name(op.src);
        } else if constexpr (std::is_same_v<T, Branch>) {
          j["op"] = "branch";
          if (op.cond) j["cond"] = name(*op.cond);
          j["target"] = op.target;
        } else if constexpr (std::is_same_v<T, Return>) {
          j["op"] = "return";
          if (op.value) j["value"] = name(*op.value);
        }
      },
      s.op);
  return j;
}

}  // namespace

json to_json(const Program& program) {
  json classes = json::array();
  for (const auto& c : program.classes()) {
    json fields = json::array();
    for (const auto& f : c.fields) fields.push_back({{"name", f.name}, {"type", f.type}});
    json methods = json::array();
    for (const auto& m : c.methods) {
      json params = json::array();
      for (VarId p : m.params) params.push_back({{"name", m.vars[p].name}, {"type", m.vars[p].type}});
      json locals = json::array();
      for (std::size_t v = 0; v < m.vars.size(); ++v) {
        const auto id = static_cast<VarId>(v);
        if (m.this_var == id || std::find(m.params.begin(), m.params.end(), id) != m.params.end()) continue;
        locals.push_back({{"name", m.vars[v].name}, {"type", m.vars[v].type}});
      }
      json body = json::array();
      for (const auto& s : m.body) body.push_back(statement_to_json(m, s));
      json mj{{"signature", m.signature}, {"returns", m.return_type}, {"params", params},
              {"locals", locals},         {"body", body}};
      if (m.is_static) mj["static"] = true;
      methods.push_back(mj);
    }
    classes.push_back({{"name", c.name},
                       {"super", c.super_class},
                       {"interfaces", c.interfaces},
                       {"fields", fields},
                       {"methods", methods}});
  }
  return {{"ceir_version", kCeirVersion},
          {"app", program.app_id()},
          {"classes", classes},
          {"externals", program.externals()},
          {"entry_methods", program.entry_methods()}};
}

}  // namespace cryptorisk::appir

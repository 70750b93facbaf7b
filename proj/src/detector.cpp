#include "cryptorisk/detector.hpp"

#include <algorithm>
#include <array>
#include <map>

namespace cryptorisk::detector {

using namespace appir;

const std::vector<RuleInfo>& rules() {
  static const std::vector<RuleInfo> table{
      {1, "SecretKeySpec constructed from a constant key"},
      {2, "PBEKeySpec constructed from a constant password"},
      {3, "KeyStore load/getKey/store with a constant password"},
      {4, "HostnameVerifier.verify returning constant true, or AllowAllHostnameVerifier"},
      {5, "X509TrustManager.checkServerTrusted with an empty body"},
      {6, "SSLSocketFactory subclass that never verifies the hostname"},
      {7, "URL constructed from a constant http:// string"},
      {8, "SSLContext.getInstance with an obsolete protocol"},
      {9, "SecureRandom seeded with a constant"},
      {10, "java.util.Random or Math.random used"},
      {11, "PBE salt is a constant"},
      {12, "block cipher in ECB mode, explicit or by default"},
      {13, "IvParameterSpec built from a constant"},
      {14, "PBE iteration count below 1000"},
      {15, "broken symmetric cipher (DES family, RC2, RC4, Blowfish, IDEA)"},
      {16, "RSA without OAEP, or asymmetric key size below 2048 (EC below 224)"},
      {17, "broken hash (MD2, MD4, MD5, SHA-1) in MessageDigest or Signature"},
      {18, "Cipher/Mac/Signature used before init"},
      {19, "forbidden PBEKeySpec constructor that leaves the password in memory"},
      {20, "crypto object never reaches a finalizing call and does not escape"},
      {21, "algorithm/parameter argument not a compile-time constant"},
  };
  return table;
}

namespace {

// ---------------------------------------------------------------------------
// Helpers

/// True when callee is an overload of `qualified` (Class.method).
bool calls(std::string_view callee, std::string_view qualified) {
  return callee.size() > qualified.size() && callee.starts_with(qualified) && callee[qualified.size()] == '(';
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

/// "javax.crypto.Cipher.getInstance(java.lang.String)" -> "Cipher.getInstance"
std::string short_name(std::string_view callee) {
  std::string_view q = callee.substr(0, callee.find('('));
  auto last = q.rfind('.');
  if (last == std::string_view::npos) return std::string(q);
  auto prev = q.rfind('.', last - 1);
  return std::string(prev == std::string_view::npos ? q : q.substr(prev + 1));
}

std::string_view method_name(std::string_view callee) {
  std::string_view q = callee.substr(0, callee.find('('));
  return q.substr(q.rfind('.') + 1);
}

bool hardcoded(const std::optional<Literal>& v) { return v && !std::holds_alternative<Null>(*v); }

std::optional<std::string> as_string(const std::optional<Literal>& v) {
  if (v && std::holds_alternative<std::string>(*v)) return std::get<std::string>(*v);
  return std::nullopt;
}

std::optional<std::int64_t> as_int(const std::optional<Literal>& v) {
  if (v && std::holds_alternative<std::int64_t>(*v)) return std::get<std::int64_t>(*v);
  return std::nullopt;
}

struct MethodFacts {
  const MethodDef* method;
  ConstantPropagation cp;
  ReachingDefinitions rd;

  explicit MethodFacts(const MethodDef& m) : method(&m), cp(m), rd(m) {}

  std::optional<Literal> arg(std::size_t index, const Call& c, std::size_t k) const {
    return k < c.args.size() ? cp.value_before(index, c.args[k]) : std::nullopt;
  }

  /// Defining statements of v before body[index], looking through copies.
  /// kEntryDef stands for a parameter or `this`.
  std::set<std::size_t> origins(std::size_t index, VarId v) const {
    std::set<std::size_t> out;
    std::set<std::pair<std::size_t, VarId>> seen;
    std::vector<std::pair<std::size_t, VarId>> work{{index, v}};
    while (!work.empty()) {
      auto [at, var] = work.back();
      work.pop_back();
      if (!seen.insert({at, var}).second) continue;
      for (std::size_t d : rd.defs_before(at, var)) {
        if (d == ReachingDefinitions::kEntryDef) {
          out.insert(d);
        } else if (const auto* a = std::get_if<Assign>(&method->body[d].op)) {
          work.emplace_back(d, a->src);
        } else {
          out.insert(d);
        }
      }
    }
    return out;
  }

  /// Renders the call's arguments, constants inline and others by name.
  std::string render(std::size_t index, const Call& c) const {
    std::string out = short_name(c.callee) + "(";
    for (std::size_t k = 0; k < c.args.size(); ++k) {
      if (k) out += ", ";
      auto v = cp.value_before(index, c.args[k]);
      out += v ? to_display(*v) : method->vars[c.args[k]].name;
    }
    return out + ")";
  }
};

class Collector {
 public:
  explicit Collector(const Program& program) : program_(program) {}

  void emit(std::string m, int id, const std::string& p, int stmt, std::string d) {
    MisuseTuple t;
    t.m = std::move(m);
    t.id = id;
    t.p = p;
    t.d = std::move(d);
    t.t = std::string(kDetectorId);
    t.loc = {p, stmt};
    t.reporters = {t.t};
    out_.push_back(std::move(t));
  }

  std::vector<MisuseTuple> finish() {
    auto position = [&](const MisuseTuple& t) -> long {
      const MethodDef* m = program_.find_method(t.loc.method);
      auto idx = m ? m->index_of(t.loc.stmt) : std::nullopt;
      return idx ? static_cast<long>(*idx) : -1;
    };
    std::stable_sort(out_.begin(), out_.end(), [&](const MisuseTuple& a, const MisuseTuple& b) {
      auto ra = program_.method_rank(a.p), rb = program_.method_rank(b.p);
      if (ra != rb) return ra < rb;
      auto pa = position(a), pb = position(b);
      if (pa != pb) return pa < pb;
      if (a.id != b.id) return a.id < b.id;
      return a.m < b.m;
    });
    std::set<MisuseKey> seen;
    std::vector<MisuseTuple> unique;
    for (auto& t : out_) {
      if (seen.insert(key_of(t)).second) unique.push_back(std::move(t));
    }
    return unique;
  }

 private:
  const Program& program_;
  std::vector<MisuseTuple> out_;
};

// ---------------------------------------------------------------------------
// Per-call rules

const std::set<std::string> kWeakProtocols{"SSL", "SSLV2", "SSLV3", "TLSV1", "TLSV1.1"};
const std::set<std::string> kWeakHashes{"MD2", "MD4", "MD5", "SHA1", "SHA-1", "SHA"};
const std::set<std::string> kBrokenCiphers{"DES",      "DESEDE",  "TRIPLEDES", "IDEA",
                                           "BLOWFISH", "RC4",     "ARCFOUR",   "RC2"};
const std::set<std::string> kStreamCiphers{"RC4", "ARCFOUR", "CHACHA20"};
const std::set<std::string> kAsymmetric{"RSA", "EC", "ECIES", "ELGAMAL"};

struct CallSite {
  const MethodFacts& f;
  std::size_t index;
  const Call& call;
  Collector& out;

  const std::string& p() const { return f.method->signature; }
  int stmt() const { return f.method->body[index].id; }
  std::optional<Literal> arg(std::size_t k) const { return f.arg(index, call, k); }
  std::string text() const { return f.render(index, call); }

  void emit(int id, std::string reason) const { out.emit(call.callee, id, p(), stmt(), text() + ": " + reason); }

  /// Value-constraint rules cannot decide a non-constant argument; report it
  /// as suspected usage instead.
  bool require_constant(std::size_t k, std::string_view what) const {
    if (k >= call.args.size() || arg(k)) return true;
    emit(21, "argument " + std::to_string(k) + " (" + std::string(what) +
                 ") is not a compile-time constant; needs further testing");
    return false;
  }
};

void check_cipher(const CallSite& s) {
  if (!s.require_constant(0, "transformation")) return;
  auto transformation = as_string(s.arg(0));
  if (!transformation) return;
  std::vector<std::string> parts;
  std::string_view rest = *transformation;
  while (true) {
    auto slash = rest.find('/');
    parts.push_back(upper(rest.substr(0, slash)));
    if (slash == std::string_view::npos) break;
    rest.remove_prefix(slash + 1);
  }
  const std::string& alg = parts[0];
  const std::string mode = parts.size() > 1 ? parts[1] : "";
  const std::string padding = parts.size() > 2 ? parts[2] : "";

  if (kBrokenCiphers.contains(alg)) s.emit(15, "broken cipher " + alg);
  if (alg == "RSA") {
    if (padding.find("OAEP") == std::string::npos) s.emit(16, "RSA without OAEP padding");
    return;
  }
  if (kAsymmetric.contains(alg) || kStreamCiphers.contains(alg)) return;
  if (mode.empty()) {
    s.emit(12, "no mode given, the provider applies ECB by default");
  } else if (mode == "ECB") {
    s.emit(12, "ECB mode");
  }
}

void check_keypair_size(const CallSite& s) {
  if (!s.require_constant(0, "key size")) return;
  auto bits = as_int(s.arg(0));
  if (!bits) return;
  std::string alg;
  if (s.call.receiver) {
    for (std::size_t o : s.f.origins(s.index, *s.call.receiver)) {
      if (o == ReachingDefinitions::kEntryDef) continue;
      const Call* c = s.f.method->body[o].as_call();
      if (c && calls(c->callee, "java.security.KeyPairGenerator.getInstance")) {
        if (auto a = as_string(s.f.arg(o, *c, 0))) alg = upper(*a);
      }
    }
  }
  const std::int64_t minimum = (alg == "EC" || alg == "ECDSA") ? 224 : 2048;
  if (*bits < minimum) {
    s.emit(16, (alg.empty() ? std::string("key") : alg + " key") + " size " + std::to_string(*bits) + " below " +
                   std::to_string(minimum));
  }
}

void check_pbe_parameters(const CallSite& s, std::size_t salt, std::size_t count) {
  if (hardcoded(s.arg(salt))) s.emit(11, "constant salt");
  if (count < s.call.args.size() && s.require_constant(count, "iteration count")) {
    if (auto n = as_int(s.arg(count)); n && *n < 1000) {
      s.emit(14, "iteration count " + std::to_string(*n) + " below 1000");
    }
  }
}

void check_call(const CallSite& s) {
  const std::string& callee = s.call.callee;

  if (calls(callee, "javax.crypto.spec.SecretKeySpec.<init>")) {
    if (hardcoded(s.arg(0))) s.emit(1, "constant key material");
  } else if (calls(callee, "javax.crypto.spec.PBEKeySpec.<init>")) {
    if (hardcoded(s.arg(0))) s.emit(2, "constant password");
    if (s.call.args.size() >= 3) check_pbe_parameters(s, 1, 2);
    if (callee == "javax.crypto.spec.PBEKeySpec.<init>(char[])" ||
        callee == "javax.crypto.spec.PBEKeySpec.<init>(char[],byte[],int)") {
      s.emit(19, "forbidden constructor; the password array is never cleared");
    }
  } else if (calls(callee, "javax.crypto.spec.PBEParameterSpec.<init>")) {
    check_pbe_parameters(s, 0, 1);
  } else if (calls(callee, "java.security.KeyStore.load") || calls(callee, "java.security.KeyStore.store") ||
             calls(callee, "java.security.KeyStore.getKey")) {
    if (hardcoded(s.arg(1))) s.emit(3, "constant keystore password");
  } else if (callee == "org.apache.http.conn.ssl.AllowAllHostnameVerifier.<init>()") {
    s.emit(4, "hostname verifier accepts every host");
  } else if (calls(callee, "java.net.URL.<init>")) {
    auto url = as_string(s.arg(0));
    if (url && upper(url->substr(0, 7)) == "HTTP://") s.emit(7, "cleartext HTTP endpoint");
  } else if (calls(callee, "javax.net.ssl.SSLContext.getInstance")) {
    if (!s.require_constant(0, "protocol")) return;
    if (auto proto = as_string(s.arg(0)); proto && kWeakProtocols.contains(upper(*proto))) {
      s.emit(8, "obsolete protocol " + *proto);
    }
  } else if (calls(callee, "java.security.SecureRandom.setSeed") ||
             callee == "java.security.SecureRandom.<init>(byte[])") {
    if (hardcoded(s.arg(0))) s.emit(9, "constant seed");
  } else if (calls(callee, "java.util.Random.<init>") || callee == "java.lang.Math.random()") {
    s.emit(10, "non-cryptographic PRNG");
  } else if (calls(callee, "javax.crypto.spec.IvParameterSpec.<init>")) {
    if (hardcoded(s.arg(0))) s.emit(13, "constant IV");
  } else if (calls(callee, "javax.crypto.Cipher.getInstance")) {
    check_cipher(s);
  } else if (callee == "java.security.KeyPairGenerator.initialize(int)" ||
             callee == "java.security.KeyPairGenerator.initialize(int,java.security.SecureRandom)") {
    check_keypair_size(s);
  } else if (calls(callee, "java.security.MessageDigest.getInstance")) {
    if (!s.require_constant(0, "algorithm")) return;
    if (auto alg = as_string(s.arg(0)); alg && kWeakHashes.contains(upper(*alg))) {
      s.emit(17, "broken hash " + *alg);
    }
  } else if (calls(callee, "java.security.Signature.getInstance")) {
    if (!s.require_constant(0, "algorithm")) return;
    if (auto alg = as_string(s.arg(0))) {
      const std::string a = upper(*alg);
      if (a.starts_with("SHA1WITH") || a.starts_with("MD5WITH") || a.starts_with("MD2WITH")) {
        s.emit(17, "signature over broken hash " + *alg);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Object-lifetime rules (18, 20)

struct Protocol {
  std::string_view factory;  // Class.getInstance
  std::set<std::string_view> init;
  std::set<std::string_view> use;
  std::set<std::string_view> finish;
};

const std::array<Protocol, 4> kProtocols{{
    {"javax.crypto.Cipher.getInstance", {"init"}, {"update", "updateAAD", "doFinal", "wrap", "unwrap"},
     {"doFinal", "wrap", "unwrap"}},
    {"javax.crypto.Mac.getInstance", {"init"}, {"update", "doFinal"}, {"doFinal"}},
    {"java.security.Signature.getInstance", {"initSign", "initVerify"}, {"update", "sign", "verify"},
     {"sign", "verify"}},
    {"java.security.MessageDigest.getInstance", {}, {}, {"digest"}},
}};

const Protocol* protocol_of(std::string_view callee) {
  for (const auto& p : kProtocols) {
    if (calls(callee, p.factory)) return &p;
  }
  return nullptr;
}

void check_typestate(const MethodFacts& f, Collector& out) {
  struct Object {
    const Protocol* protocol;
    bool initialized = false;
    bool reported = false;
  };
  std::vector<Object> objects;
  std::map<VarId, std::size_t> bound;
  const MethodDef& m = *f.method;
  for (std::size_t i = 0; i < m.body.size(); ++i) {
    const Statement& st = m.body[i];
    if (const Call* c = st.as_call()) {
      if (c->receiver) {
        if (auto it = bound.find(*c->receiver); it != bound.end()) {
          Object& o = objects[it->second];
          const auto name = method_name(c->callee);
          if (o.protocol->init.contains(name)) {
            o.initialized = true;
          } else if (o.protocol->use.contains(name) && !o.initialized && !o.reported) {
            o.reported = true;
            out.emit(c->callee, 18, m.signature, st.id,
                     f.render(i, *c) + ": called before " + std::string(*o.protocol->init.begin()));
          }
        }
      }
    }
    auto def = st.defined_var();
    if (!def) continue;
    if (const auto* a = std::get_if<Assign>(&st.op); a && bound.contains(a->src)) {
      bound[*def] = bound[a->src];
    } else if (const Call* c = st.as_call(); c && protocol_of(c->callee) && !protocol_of(c->callee)->init.empty()) {
      objects.push_back({protocol_of(c->callee)});
      bound[*def] = objects.size() - 1;
    } else {
      bound.erase(*def);
    }
  }
}

void check_incomplete(const MethodFacts& f, Collector& out) {
  const MethodDef& m = *f.method;
  for (std::size_t i = 0; i < m.body.size(); ++i) {
    const Call* origin = m.body[i].as_call();
    const Protocol* proto = origin ? protocol_of(origin->callee) : nullptr;
    if (!proto || !origin->dst) continue;

    // Flow-insensitive alias set through plain copies.
    std::set<VarId> alias{*origin->dst};
    for (bool grew = true; grew;) {
      grew = false;
      for (const auto& st : m.body) {
        if (const auto* a = std::get_if<Assign>(&st.op); a && alias.contains(a->src)) {
          grew |= alias.insert(a->dst).second;
        }
      }
    }
    bool finished = false;
    bool escapes = false;
    for (const auto& st : m.body) {
      if (const Call* c = st.as_call()) {
        if (c->receiver && alias.contains(*c->receiver) && proto->finish.contains(method_name(c->callee))) {
          finished = true;
        }
        for (VarId a : c->args) escapes |= alias.contains(a);
      } else if (const auto* s = std::get_if<FieldStore>(&st.op)) {
        escapes |= alias.contains(s->src);
      } else if (const auto* r = std::get_if<Return>(&st.op)) {
        escapes |= r->value && alias.contains(*r->value);
      }
    }
    if (!finished && !escapes) {
      out.emit(origin->callee, 20, m.signature, m.body[i].id,
               f.render(i, *origin) + ": object never reaches " + std::string(*proto->finish.begin()));
    }
  }
}

// ---------------------------------------------------------------------------
// Structural rules (4, 5, 6)

bool implements(const ClassDef& c, std::string_view iface) {
  return std::find(c.interfaces.begin(), c.interfaces.end(), iface) != c.interfaces.end();
}

const MethodDef* method_named(const ClassDef& c, std::string_view name) {
  for (const auto& m : c.methods) {
    if (m.name() == name) return &m;
  }
  return nullptr;
}

struct StructuralFinding {
  int id;
  const ClassDef* cls;
  const MethodDef* anchor;  // where to report when the class is never installed
  std::string api;          // m for the fallback tuple
  std::string reason;
  std::vector<std::string_view> installers;
};

std::vector<StructuralFinding> structural_findings(const Program& program, const std::vector<MethodFacts>& facts) {
  std::vector<StructuralFinding> out;
  for (const auto& c : program.classes()) {
    if (implements(c, "javax.net.ssl.HostnameVerifier")) {
      if (const MethodDef* v = method_named(c, "verify")) {
        const MethodFacts& f = facts[program.method_rank(v->signature)];
        bool any = false;
        bool all_true = true;
        for (std::size_t i = 0; i < v->body.size(); ++i) {
          const auto* r = std::get_if<Return>(&v->body[i].op);
          if (!r) continue;
          any = true;
          auto val = r->value ? f.cp.value_before(i, *r->value) : std::nullopt;
          all_true = all_true && val && *val == Literal{true};
        }
        if (any && all_true) {
          out.push_back({4, &c, v, "javax.net.ssl.HostnameVerifier.verify(java.lang.String,javax.net.ssl.SSLSession)",
                         c.name + ".verify always returns true",
                         {"javax.net.ssl.HttpsURLConnection.setHostnameVerifier",
                          "javax.net.ssl.HttpsURLConnection.setDefaultHostnameVerifier"}});
        }
      }
    }
    if (implements(c, "javax.net.ssl.X509TrustManager")) {
      if (const MethodDef* chk = method_named(c, "checkServerTrusted")) {
        bool has_call = std::any_of(chk->body.begin(), chk->body.end(), [](const Statement& s) { return s.as_call(); });
        if (!has_call) {
          out.push_back({5, &c, chk,
                         "javax.net.ssl.X509TrustManager.checkServerTrusted(java.security.cert.X509Certificate[],"
                         "java.lang.String)",
                         c.name + ".checkServerTrusted accepts every certificate chain",
                         {"javax.net.ssl.SSLContext.init"}});
        }
      }
    }
    if (c.super_class == "javax.net.ssl.SSLSocketFactory" && !c.methods.empty()) {
      bool verifies = false;
      for (const auto& m : c.methods) {
        for (const auto& s : m.body) {
          const Call* call = s.as_call();
          verifies |= call && calls(call->callee, "javax.net.ssl.HostnameVerifier.verify");
        }
      }
      if (!verifies) {
        const MethodDef* anchor = method_named(c, "createSocket");
        out.push_back({6, &c, anchor ? anchor : &c.methods.front(),
                       "javax.net.ssl.SSLSocketFactory.createSocket(java.net.Socket,java.lang.String,int,boolean)",
                       c.name + " creates sockets without hostname verification",
                       {"javax.net.ssl.HttpsURLConnection.setSSLSocketFactory",
                        "javax.net.ssl.HttpsURLConnection.setDefaultSSLSocketFactory"}});
      }
    }
  }
  return out;
}

void report_structural(const Program& program, const std::vector<MethodFacts>& facts, Collector& out) {
  for (const auto& finding : structural_findings(program, facts)) {
    const std::string ctor = finding.cls->name + ".<init>(";
    bool installed = false;
    for (const auto& f : facts) {
      const MethodDef& m = *f.method;
      for (std::size_t i = 0; i < m.body.size(); ++i) {
        const Call* c = m.body[i].as_call();
        if (!c) continue;
        bool is_installer = std::any_of(finding.installers.begin(), finding.installers.end(),
                                        [&](std::string_view q) { return calls(c->callee, q); });
        if (!is_installer) continue;
        bool from_class = false;
        for (VarId a : c->args) {
          for (std::size_t o : f.origins(i, a)) {
            if (o == ReachingDefinitions::kEntryDef) continue;
            const Call* def = m.body[o].as_call();
            from_class |= def && def->callee.starts_with(ctor);
          }
        }
        if (from_class) {
          installed = true;
          out.emit(c->callee, finding.id, m.signature, m.body[i].id,
                   f.render(i, *c) + ": installs " + finding.reason);
        }
      }
    }
    if (!installed) {
      const MethodDef& a = *finding.anchor;
      out.emit(finding.api, finding.id, a.signature, a.body.empty() ? -1 : a.body.front().id, finding.reason);
    }
  }
}

}  // namespace

std::vector<MisuseTuple> detect(const Program& program) {
  std::vector<MethodFacts> facts;
  facts.reserve(program.methods().size());
  for (const MethodDef* m : program.methods()) facts.emplace_back(*m);

  Collector out(program);
  for (const auto& f : facts) {
    for (std::size_t i = 0; i < f.method->body.size(); ++i) {
      if (const Call* c = f.method->body[i].as_call()) check_call(CallSite{f, i, *c, out});
    }
    check_typestate(f, out);
    check_incomplete(f, out);
  }
  report_structural(program, facts, out);
  return out.finish();
}

}  // namespace cryptorisk::detector

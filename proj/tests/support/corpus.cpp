#include "corpus.hpp"

#include <fstream>
#include <random>
#include <set>

namespace testsupport {

using nlohmann::json;

namespace {

constexpr const char* kClass = "com.synth.App";

class MethodBuilder {
 public:
  explicit MethodBuilder(std::string name) : signature_(std::string(kClass) + "." + name + "()") {}

  const std::string& signature() const { return signature_; }
  int next_id() const { return static_cast<int>(body_.size()); }

  std::string local(const std::string& type) {
    const std::string name = "l" + std::to_string(locals_.size());
    locals_.push_back({{"name", name}, {"type", type}});
    return name;
  }

  std::string constant(const json& value, const std::string& type) {
    const std::string v = local(type);
    body_.push_back({{"id", next_id()}, {"op", "const"}, {"dst", v}, {"value", value}, {"type", type}});
    return v;
  }

  /// Emits a call and returns its statement id.
  int call(const std::string& callee, const std::string& receiver, const std::vector<std::string>& args,
           const std::string& dst = "") {
    json s{{"id", next_id()}, {"op", "call"}, {"callee", callee}, {"args", args}};
    if (!receiver.empty()) s["receiver"] = receiver;
    if (!dst.empty()) s["dst"] = dst;
    body_.push_back(s);
    externals_.insert(callee);
    return s["id"];
  }

  std::string call_value(const std::string& callee, const std::string& receiver, const std::vector<std::string>& args,
                         const std::string& type, int* id = nullptr) {
    const std::string v = local(type);
    const int sid = call(callee, receiver, args, v);
    if (id) *id = sid;
    return v;
  }

  std::string assign(const std::string& src, const std::string& type) {
    const std::string v = local(type);
    body_.push_back({{"id", next_id()}, {"op", "assign"}, {"dst", v}, {"src", src}});
    return v;
  }

  std::string load_static(const std::string& field, const std::string& type) {
    const std::string v = local(type);
    body_.push_back({{"id", next_id()}, {"op", "load"}, {"dst", v}, {"field", field}});
    return v;
  }

  json finish(std::set<std::string>& externals) {
    body_.push_back({{"id", next_id()}, {"op", "return"}});
    externals.insert(externals_.begin(), externals_.end());
    return {{"signature", signature_},
            {"static", true},
            {"params", json::array()},
            {"locals", locals_},
            {"body", body_}};
  }

 private:
  std::string signature_;
  json locals_ = json::array();
  json body_ = json::array();
  std::set<std::string> externals_;
};

enum class Sink { None, Network, File, Log, Prefs };

void emit_sink(MethodBuilder& b, const std::string& data, Sink sink) {
  switch (sink) {
    case Sink::None:
      return;
    case Sink::Network: {
      const auto spec = b.constant("https://api.example.com/v1", "java.lang.String");
      const auto url = b.call_value("java.net.URL.<init>(java.lang.String)", "", {spec}, "java.net.URL");
      const auto conn = b.call_value("java.net.URL.openConnection()", url, {}, "java.net.URLConnection");
      const auto http = b.assign(conn, "java.net.HttpURLConnection");
      const auto raw = b.call_value("java.net.HttpURLConnection.getOutputStream()", http, {}, "java.io.OutputStream");
      const auto out = b.call_value("java.io.DataOutputStream.<init>(java.io.OutputStream)", "", {raw},
                                    "java.io.DataOutputStream");
      b.call("java.io.DataOutputStream.write(byte[])", out, {data});
      return;
    }
    case Sink::File: {
      const auto path = b.constant("cache.bin", "java.lang.String");
      const auto fos = b.call_value("java.io.FileOutputStream.<init>(java.lang.String)", "", {path},
                                    "java.io.FileOutputStream");
      b.call("java.io.FileOutputStream.write(byte[])", fos, {data});
      return;
    }
    case Sink::Log: {
      const auto tag = b.constant("synth", "java.lang.String");
      const auto text = b.call_value("java.lang.String.<init>(byte[])", "", {data}, "java.lang.String");
      b.call("android.util.Log.d(java.lang.String,java.lang.String)", "", {tag, text});
      return;
    }
    case Sink::Prefs: {
      const auto editor = b.load_static(std::string(kClass) + ".editor", "android.content.SharedPreferences$Editor");
      const auto key = b.constant("blob", "java.lang.String");
      const auto text = b.call_value("java.lang.String.<init>(byte[])", "", {data}, "java.lang.String");
      b.call("android.content.SharedPreferences$Editor.putString(java.lang.String,java.lang.String)", editor,
             {key, text});
      return;
    }
  }
}

struct Finding {
  int id;
  std::string api;
  std::string method;
  int stmt;
};

std::string plaintext(MethodBuilder& b) {
  const auto s = b.constant("user record", "java.lang.String");
  return b.call_value("java.lang.String.getBytes()", s, {}, "byte[]");
}

// Cipher.getInstance(transform) keyed by KeyGenerator, doFinal output to sink.
Finding cipher_snippet(MethodBuilder& b, const std::string& transform, int id, Sink sink) {
  const auto alg = b.constant("AES", "java.lang.String");
  const auto kg = b.call_value("javax.crypto.KeyGenerator.getInstance(java.lang.String)", "", {alg},
                               "javax.crypto.KeyGenerator");
  const auto size = b.constant(256, "int");
  b.call("javax.crypto.KeyGenerator.init(int)", kg, {size});
  const auto key = b.call_value("javax.crypto.KeyGenerator.generateKey()", kg, {}, "javax.crypto.SecretKey");
  const auto tr = b.constant(transform, "java.lang.String");
  int site = 0;
  const auto cipher =
      b.call_value("javax.crypto.Cipher.getInstance(java.lang.String)", "", {tr}, "javax.crypto.Cipher", &site);
  const auto mode = b.constant(1, "int");
  b.call("javax.crypto.Cipher.init(int,java.security.Key)", cipher, {mode, key});
  const auto data = plaintext(b);
  const auto out = b.call_value("javax.crypto.Cipher.doFinal(byte[])", cipher, {data}, "byte[]");
  emit_sink(b, out, sink);
  return {id, "javax.crypto.Cipher.getInstance(java.lang.String)", b.signature(), site};
}

Finding md5_snippet(MethodBuilder& b, Sink sink) {
  const auto alg = b.constant("MD5", "java.lang.String");
  int site = 0;
  const auto md = b.call_value("java.security.MessageDigest.getInstance(java.lang.String)", "", {alg},
                               "java.security.MessageDigest", &site);
  const auto data = plaintext(b);
  const auto out = b.call_value("java.security.MessageDigest.digest(byte[])", md, {data}, "byte[]");
  emit_sink(b, out, sink);
  return {17, "java.security.MessageDigest.getInstance(java.lang.String)", b.signature(), site};
}

Finding const_key_snippet(MethodBuilder& b, Sink sink) {
  const auto raw = b.constant(std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16}, "byte[]");
  const auto alg = b.constant("AES", "java.lang.String");
  int site = 0;
  const auto key = b.call_value("javax.crypto.spec.SecretKeySpec.<init>(byte[],java.lang.String)", "", {raw, alg},
                                "javax.crypto.spec.SecretKeySpec", &site);
  const auto tr = b.constant("AES/GCM/NoPadding", "java.lang.String");
  const auto cipher = b.call_value("javax.crypto.Cipher.getInstance(java.lang.String)", "", {tr}, "javax.crypto.Cipher");
  const auto mode = b.constant(1, "int");
  b.call("javax.crypto.Cipher.init(int,java.security.Key)", cipher, {mode, key});
  const auto data = plaintext(b);
  const auto out = b.call_value("javax.crypto.Cipher.doFinal(byte[])", cipher, {data}, "byte[]");
  emit_sink(b, out, sink);
  return {1, "javax.crypto.spec.SecretKeySpec.<init>(byte[],java.lang.String)", b.signature(), site};
}

Finding random_snippet(MethodBuilder& b, Sink sink) {
  int site = 0;
  const auto rnd = b.call_value("java.util.Random.<init>()", "", {}, "java.util.Random", &site);
  const auto token = b.call_value("java.util.Random.nextInt()", rnd, {}, "int");
  const auto text = b.call_value("java.lang.String.valueOf(int)", "", {token}, "java.lang.String");
  const auto data = b.call_value("java.lang.String.getBytes()", text, {}, "byte[]");
  emit_sink(b, data, sink);
  return {10, "java.util.Random.<init>()", b.signature(), site};
}

Finding tls_snippet(MethodBuilder& b) {
  const auto proto = b.constant("SSLv3", "java.lang.String");
  int site = 0;
  const auto ctx = b.call_value("javax.net.ssl.SSLContext.getInstance(java.lang.String)", "", {proto},
                                "javax.net.ssl.SSLContext", &site);
  b.call_value("javax.net.ssl.SSLContext.getSocketFactory()", ctx, {}, "javax.net.ssl.SSLSocketFactory");
  return {8, "javax.net.ssl.SSLContext.getInstance(java.lang.String)", b.signature(), site};
}

Finding http_snippet(MethodBuilder& b) {
  const auto spec = b.constant("http://tracker.example.com/ping", "java.lang.String");
  int site = 0;
  const auto url = b.call_value("java.net.URL.<init>(java.lang.String)", "", {spec}, "java.net.URL", &site);
  b.call_value("java.net.URL.openConnection()", url, {}, "java.net.URLConnection");
  return {7, "java.net.URL.<init>(java.lang.String)", b.signature(), site};
}

// CG rule names are vul.1..vul.16 over CG's ids in ascending order.
std::string cg_rule(int id) { return "vul." + std::to_string(id <= 7 ? id : id - 1); }

json cc_finding(const Finding& f) {
  json j{{"api", f.api}, {"method", f.method}, {"location", {{"method", f.method}, {"stmt", f.stmt}}}};
  switch (f.id) {
    case 12: j["error"] = "ConstraintError"; j["description"] = "transformation uses ECB"; break;
    case 15: j["error"] = "ConstraintError"; j["description"] = "algorithm DES is not allowed"; break;
    case 17: j["error"] = "ConstraintError"; j["description"] = "digest algorithm MD5 is not allowed"; break;
    case 1: j["error"] = "RequiredPredicateError"; j["description"] = "hard-coded key material"; break;
    case 10: j["error"] = "RequiredPredicateError"; j["description"] = "value is not random"; break;
    case 8: j["error"] = "ConstraintError"; j["description"] = "protocol SSLv3 is not allowed"; break;
    default: return nullptr;
  }
  return j;
}

}  // namespace

std::vector<CorpusApp> make_corpus(std::size_t apps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto roll = [&](int n) { return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(rng)); };
  const std::vector<Sink> sinks{Sink::None, Sink::Network, Sink::File, Sink::Log, Sink::Prefs};
  const std::set<int> cg_caps{1, 2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14, 15, 16, 17};
  const std::set<int> cc_caps{1, 2, 3, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21};

  std::vector<CorpusApp> out;
  for (std::size_t a = 0; a < apps; ++a) {
    CorpusApp app;
    char name[32];
    std::snprintf(name, sizeof name, "app%02zu", a);
    app.app = name;

    std::set<std::string> externals;
    json methods = json::array();
    std::vector<Finding> findings;
    MethodBuilder main_b("main");
    const int snippets = roll(5);  // some apps have no crypto at all
    for (int s = 0; s < snippets; ++s) {
      MethodBuilder b("s" + std::to_string(s));
      const Sink sink = sinks[roll(static_cast<int>(sinks.size()))];
      switch (roll(8)) {
        case 0: findings.push_back(cipher_snippet(b, "AES", 12, sink)); break;
        case 1: findings.push_back(cipher_snippet(b, "AES/ECB/PKCS5Padding", 12, sink)); break;
        case 2: findings.push_back(cipher_snippet(b, "DES/CBC/PKCS5Padding", 15, sink)); break;
        case 3: findings.push_back(md5_snippet(b, sink)); break;
        case 4: findings.push_back(const_key_snippet(b, sink)); break;
        case 5: findings.push_back(random_snippet(b, sink)); break;
        case 6: findings.push_back(tls_snippet(b)); break;
        default: findings.push_back(http_snippet(b)); break;
      }
      methods.push_back(b.finish(externals));
    }
    // main calls every snippet.
    json main_m = main_b.finish(externals);
    json main_body = json::array();
    for (int s = 0; s < snippets; ++s) {
      main_body.push_back({{"id", s}, {"op", "call"},
                           {"callee", std::string(kClass) + ".s" + std::to_string(s) + "()"},
                           {"args", json::array()}});
    }
    main_body.push_back({{"id", snippets}, {"op", "return"}});
    main_m["body"] = main_body;
    methods.push_back(main_m);

    app.program = {{"ceir_version", 1},
                   {"app", app.app},
                   {"classes",
                    {{{"name", kClass},
                      {"super", "java.lang.Object"},
                      {"interfaces", json::array()},
                      {"fields", {{{"name", "editor"}, {"type", "android.content.SharedPreferences$Editor"}}}},
                      {"methods", methods}}}},
                   {"externals", externals},
                   {"entry_methods", {std::string(kClass) + ".main()"}}};

    json cg = json::array();
    json cc = json::array();
    for (const Finding& f : findings) {
      if (cg_caps.contains(f.id) && roll(3) != 0) {
        cg.push_back({{"rule", cg_rule(f.id)}, {"api", f.api}, {"method", f.method},
                      {"description", "synthetic"}, {"location", {{"method", f.method}, {"stmt", f.stmt}}}});
      }
      if (cc_caps.contains(f.id) && roll(3) != 0) {
        if (json j = cc_finding(f); !j.is_null()) cc.push_back(j);
      }
    }
    if (roll(4) == 0) {
      cc.push_back({{"error", "HardCodedError"}, {"api", "java.lang.String.getBytes()"},
                    {"method", std::string(kClass) + ".main()"}, {"description", "outside the mapping table"}});
    }
    if (!cg.empty()) app.reports["CG"] = {{"detector", "CG"}, {"findings", cg}};
    if (!cc.empty()) app.reports["CC"] = {{"detector", "CC"}, {"findings", cc}};
    out.push_back(std::move(app));
  }
  return out;
}

void write_corpus(const std::filesystem::path& dir, const std::vector<CorpusApp>& corpus) {
  std::filesystem::create_directories(dir / "programs");
  std::filesystem::create_directories(dir / "reports");
  for (const auto& app : corpus) {
    std::ofstream(dir / "programs" / (app.app + ".ceir.json")) << app.program.dump(2) << "\n";
    for (const auto& [det, doc] : app.reports) {
      std::ofstream(dir / "reports" / (app.app + "." + det + ".json")) << doc.dump(2) << "\n";
    }
  }
}

}  // namespace testsupport

#include <doctest.h>

#include <random>

#include "cryptorisk/appir.hpp"
#include "cryptorisk/error.hpp"
#include "random_program.hpp"

using namespace cryptorisk;
using namespace cryptorisk::appir;
using nlohmann::json;

namespace {

json minimal(json body, json locals = json::array()) {
  return {{"ceir_version", 1},
          {"app", "t"},
          {"classes",
           {{{"name", "a.A"}, {"super", "java.lang.Object"}, {"interfaces", json::array()},
             {"fields", json::array()},
             {"methods",
              {{{"signature", "a.A.f(int)"}, {"params", {{{"name", "n"}, {"type", "int"}}}},
                {"locals", locals}, {"body", body}}}}}}},
          {"externals", {"lib.X.g(int)"}},
          {"entry_methods", {"a.A.f(int)"}}};
}

}  // namespace

TEST_SUITE("appir") {
  TEST_CASE("fixture parses with implicit this and declaration order") {
    const Program p = load_program(CRYPTORISK_FIXTURES "/fig1.ceir.json");
    CHECK(p.app_id() == "fig1");
    REQUIRE(p.methods().size() == 4);
    const MethodDef* enc = p.find_method("com.example.Main.encrypt(java.lang.String)");
    REQUIRE(enc);
    CHECK(enc->this_var.has_value());
    CHECK(enc->params.size() == 1);
    CHECK(enc->class_name() == "com.example.Main");
    CHECK(enc->name() == "encrypt");
    CHECK(p.method_rank("com.example.Main.send(byte[])") == 1);
    CHECK(call_sites_of(p, "javax.crypto.Cipher.getInstance(java.lang.String)") ==
          std::vector<Loc>{{"com.example.Main.encrypt(java.lang.String)", 6}});
    CHECK(p.call_at({"com.example.Main.main()", 2}).callee == "com.example.Main.send(byte[])");
    CHECK_THROWS_AS(p.call_at({"com.example.Main.main()", 0}), DomainError);
  }

  TEST_CASE("successors follow branches and stop at return") {
    json body = json::array({{{"id", 0}, {"op", "branch"}, {"cond", "n"}, {"target", 2}},
                             {{"id", 1}, {"op", "branch"}, {"target", 3}},
                             {{"id", 2}, {"op", "call"}, {"callee", "lib.X.g(int)"}, {"args", {"n"}}},
                             {{"id", 3}, {"op", "return"}}});
    const Program p = parse_program(minimal(body));
    const MethodDef& m = *p.methods().front();
    CHECK(m.successors(0) == std::vector<std::size_t>{1, 2});
    CHECK(m.successors(1) == std::vector<std::size_t>{3});
    CHECK(m.successors(2) == std::vector<std::size_t>{3});
    CHECK(m.successors(3).empty());
  }

  TEST_CASE("every violation is reported at once") {
    json body = json::array({{{"id", 0}, {"op", "assign"}, {"dst", "ghost"}, {"src", "n"}},
                             {{"id", 1}, {"op", "jump"}},
                             {{"id", 2}, {"op", "branch"}, {"target", 99}},
                             {{"id", 2}, {"op", "call"}, {"callee", "lib.Unknown.h()"}, {"args", json::array()}}});
    try {
      parse_program(minimal(body), "bad.json");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.violations().size() >= 5);
      CHECK(std::string(e.what()).starts_with("bad.json"));
    }

    json wrong_version = minimal(json::array({{{"id", 0}, {"op", "return"}}}));
    wrong_version["ceir_version"] = 2;
    CHECK_THROWS_AS(parse_program(wrong_version), ParseError);
    CHECK_THROWS_AS(parse_program_text("{not json"), ParseError);
  }

  TEST_CASE("serialization round trip on random programs") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
      const json doc = testsupport::random_taint_program(rng);
      const Program p = parse_program(doc);
      const json back = to_json(p);
      const Program q = parse_program(back);
      CHECK(p == q);
      CHECK(to_json(q) == back);
    }
    const Program fig1 = load_program(CRYPTORISK_FIXTURES "/fig1.ceir.json");
    CHECK(parse_program(to_json(fig1)) == fig1);
  }

  TEST_CASE("call_sites_of agrees with a scan of the document") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
      const json doc = testsupport::random_taint_program(rng);
      const Program p = parse_program(doc);
      for (const char* callee : {testsupport::kSource, testsupport::kSink, "t.C.m1(java.lang.Object)"}) {
        std::vector<Loc> expected;
        for (const auto& m : doc["classes"][0]["methods"]) {
          for (const auto& s : m["body"]) {
            if (s["op"] == "call" && s["callee"] == callee) expected.push_back({m["signature"], s["id"]});
          }
        }
        CHECK(call_sites_of(p, callee) == expected);
      }
    }
  }

  TEST_CASE("loc and literal json") {
    const Loc l{"a.A.f(int)", 3};
    CHECK(loc_from_json(to_json(l)) == l);
    for (const Literal& lit : {Literal{Null{}}, Literal{true}, Literal{std::int64_t{42}}, Literal{2.5},
                               Literal{std::string("AES")}, Literal{std::vector<std::int64_t>{1, 2}}}) {
      CHECK(literal_from_json(literal_to_json(lit)) == lit);
    }
  }
}

#include <doctest.h>

#include <algorithm>
#include <random>

#include "builders.hpp"
#include "cryptorisk/dataflow.hpp"
#include "cryptorisk/detector.hpp"
#include "cryptorisk/error.hpp"
#include "random_program.hpp"
#include "taint_oracle.hpp"

using namespace cryptorisk;
using namespace cryptorisk::dataflow;
using appir::Loc;

namespace {

const Taxonomy& tax() { return Taxonomy::defaults(); }

appir::Program fig1() { return appir::load_program(CRYPTORISK_FIXTURES "/fig1.ceir.json"); }

TaintConfig random_config(int depth) {
  TaintConfig cfg;
  cfg.sources = {testsupport::kSource, testsupport::kFillSource};
  cfg.sinks = {testsupport::kSink};
  cfg.depth = depth;
  return cfg;
}

const std::string kEncrypt = "com.example.Main.encrypt(java.lang.String)";
const std::string kSend = "com.example.Main.send(byte[])";
const std::string kSave = "com.example.Main.save(byte[])";

}  // namespace

TEST_SUITE("dataflow") {
  TEST_CASE("motivating example: two flows, network and file") {
    const auto p = fig1();
    const auto ann = annotate(detector::detect(p), p, tax());
    REQUIRE(ann.tuples.size() == 1);
    const auto& t = ann.tuples[0];
    CHECK(t.locatable);
    CHECK(t.S == std::vector<SinkCategory>{SinkCategory::File, SinkCategory::Network});
    REQUIRE(ann.flows.size() == 2);
    CHECK(ann.flows[0].sink == Loc{kSave, 2});
    CHECK(ann.flows[1].sink == Loc{kSend, 6});
    CHECK(ann.flows[1].category == SinkCategory::Network);
    CHECK(ann.flows[0].source == Loc{kEncrypt, 6});
  }

  TEST_CASE("sink categorization tracks the stream back to its connection") {
    const auto p = fig1();
    CHECK(ds_track(p, {kSend, 6}, tax()) == SinkCategory::Network);
    CHECK(ds_track(p, {kSave, 2}, tax()) == SinkCategory::File);
    CHECK(ds_track(p, {kSend, 2}, tax()) == SinkCategory::Network);
    CHECK_THROWS_AS(ds_track(p, {kEncrypt, 6}, tax()), DomainError);
    CHECK_THROWS_AS(ds_track(p, {kEncrypt, 0}, tax()), DomainError);

    // With the connection tags removed only the stream's own default remains.
    Taxonomy plain = tax();
    plain.catalog = ApiCatalog{};
    for (const auto& [sig, e] : tax().catalog.entries()) plain.catalog.add(e);
    CHECK(ds_track(p, {kSend, 6}, plain) == SinkCategory::NcOutStream);
  }

  TEST_CASE("source refinement") {
    const auto p = fig1();
    CHECK(refine_sources("javax.crypto.Cipher.getInstance(java.lang.String)", p, tax()) ==
          std::set<std::string>{"javax.crypto.Cipher.getInstance(java.lang.String)"});
    const auto refined = refine_sources("javax.crypto.KeyGenerator.init(int)", p, tax());
    CHECK(refined.contains("javax.crypto.KeyGenerator.init(int)"));
    CHECK(refined.contains("javax.crypto.Cipher.doFinal(byte[])"));
    CHECK_FALSE(refined.contains("javax.crypto.Cipher.getInstance(java.lang.String)"));
    CHECK_THROWS_AS(refine_sources("com.example.Unknown.call()", p, tax()), DomainError);
  }

  TEST_CASE("a PAPI misuse inherits the flows of the DAPIs it affects") {
    const auto p = fig1();
    MisuseTuple weak;
    weak.m = "javax.crypto.KeyGenerator.init(int)";
    weak.id = 16;
    weak.p = kEncrypt;
    weak.t = "CC";
    weak.reporters = {"CC"};
    weak.loc = {kEncrypt, 3};
    const auto ann = annotate({weak}, p, tax());
    CHECK(ann.tuples[0].S == std::vector<SinkCategory>{SinkCategory::File, SinkCategory::Network});
  }

  TEST_CASE("a tuple whose parent never calls the api is unlocatable") {
    const auto p = fig1();
    MisuseTuple t;
    t.m = "javax.crypto.Cipher.getInstance(java.lang.String)";
    t.id = 12;
    t.p = kSend;
    t.t = "CG";
    t.reporters = {"CG"};
    t.loc = {kSend, -1};
    const auto ann = annotate({t}, p, tax());
    CHECK_FALSE(ann.tuples[0].locatable);
    CHECK(ann.tuples[0].S.empty());
    CHECK(ann.flows.empty());
  }

  TEST_CASE("a constant overwrite kills taint") {
    using namespace testsupport;
    nlohmann::json body = nlohmann::json::array(
        {call(0, "x", kSource, "", {}), cst(1, "x", "clean", "java.lang.String"), call(2, "", kSink, "", {"x"}),
         call(3, "y", kSource, "", {}), call(4, "", kSink, "", {"y"}), ret(5)});
    const auto p = appir::parse_program(single_method({{"x", "java.lang.Object"}, {"y", "java.lang.Object"}}, body));
    const auto flows = taint_connect(p, random_config(3));
    CHECK(flows == std::set<TaintFlow>{{{"a.A.f(java.lang.String)", 3}, {"a.A.f(java.lang.String)", 4}}});
  }

  TEST_CASE("taint analysis is sound against path enumeration") {
    std::mt19937_64 rng(2024);
    std::size_t oracle_total = 0, surplus = 0;
    for (int i = 0; i < 80; ++i) {
      const auto p = appir::parse_program(testsupport::random_taint_program(rng));
      const auto cfg = random_config(8);
      const auto got = taint_connect(p, cfg);
      const auto want = testsupport::oracle_flows(p, cfg);
      std::vector<TaintFlow> missed;
      std::set_difference(want.begin(), want.end(), got.begin(), got.end(), std::back_inserter(missed));
      CAPTURE(appir::to_json(p).dump());
      CHECK(missed.empty());
      oracle_total += want.size();
      surplus += got.size() - (want.size() - missed.size());
    }
    CHECK(oracle_total > 0);
    MESSAGE("oracle flows " << oracle_total << ", surplus " << surplus);
  }

  TEST_CASE("raising the depth bound only adds flows") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 40; ++i) {
      const auto p = appir::parse_program(testsupport::random_taint_program(rng));
      std::set<TaintFlow> previous;
      for (int k = 1; k <= 5; ++k) {
        const auto flows = taint_connect(p, random_config(k));
        CHECK(std::includes(flows.begin(), flows.end(), previous.begin(), previous.end()));
        previous = flows;
      }
    }
    CHECK_THROWS_AS(taint_connect(fig1(), random_config(0)), DomainError);
  }

  TEST_CASE("unresolved sources are listed") {
    auto cfg = random_config(3);
    cfg.sources.insert("lib.Never.declared()");
    std::mt19937_64 rng(1);
    const auto p = appir::parse_program(testsupport::random_taint_program(rng));
    CHECK(unresolved_sources(p, cfg) == std::vector<std::string>{"lib.Never.declared()"});
  }
}

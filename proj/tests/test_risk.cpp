#include <doctest.h>

#include <random>

#include "cryptorisk/error.hpp"
#include "cryptorisk/risk.hpp"
#include "oracles.hpp"

using namespace cryptorisk;
using namespace cryptorisk::risk;

namespace {

MisuseTuple tuple(int id, std::set<std::string> reporters, std::vector<SinkCategory> S, int stmt = 0) {
  MisuseTuple t;
  t.m = "javax.crypto.Cipher.getInstance(java.lang.String)";
  t.id = id;
  t.p = "a.A.f()";
  t.t = *reporters.begin();
  t.reporters = std::move(reporters);
  t.S = std::move(S);
  t.loc = {"a.A.f()", stmt};
  return t;
}

MisuseTuple random_tuple(std::mt19937_64& rng) {
  const std::vector<std::string> tools{"BI", "BS", "CC", "CG"};
  std::uniform_int_distribution<int> id(1, 21), sc(0, 8), n(0, 4), pick(0, 3);
  std::set<std::string> reporters{tools[pick(rng)]};
  if (pick(rng) == 0) reporters.insert(tools[pick(rng)]);
  std::vector<SinkCategory> S;
  for (int i = n(rng); i > 0; --i) S.push_back(kSinkCategories[sc(rng)]);
  return tuple(id(rng), reporters, S, n(rng));
}

const CapabilityMatrix& caps() { return Taxonomy::defaults().capabilities; }

}  // namespace

TEST_SUITE("risk") {
  TEST_CASE("fractions are exact") {
    CHECK(Fraction(2, 4) == Fraction(1, 2));
    CHECK(Fraction(3, -6) == Fraction(-1, 2));
    CHECK(Fraction::parse("0.8") == Fraction(4, 5));
    CHECK(Fraction::parse("2/3") == Fraction(2, 3));
    CHECK(Fraction::parse("7") == Fraction(7));
    CHECK(Fraction(2, 3) > Fraction(1, 2));
    CHECK(Fraction(1, 2).to_string() == "1/2");
    CHECK_THROWS_AS(Fraction(1, 0), DomainError);
    CHECK_THROWS_AS(Fraction::parse("abc"), DomainError);
    CHECK_THROWS_AS(Fraction::parse("1/0"), DomainError);
  }

  TEST_CASE("risk of the motivating example") {
    const std::vector<MisuseTuple> fig1{tuple(12, {"CC", "CG"}, {SinkCategory::Network, SinkCategory::File})};
    CHECK(risk_value(fig1, {"CG", "CC"}) == 7 * (10 + 5));
    CHECK(testsupport::risk_oracle(fig1, {"CG", "CC"}) == testsupport::Rational(105));
  }

  TEST_CASE("no flows or no detection means zero risk") {
    CHECK(risk_value({}, {"CG", "CC"}) == 0);
    CHECK(risk_value({tuple(1, {"CG"}, {})}, {"CG", "CC"}) == 0);
    // BS findings do not gate the value unless BS is in the chain.
    const std::vector<MisuseTuple> bs{tuple(12, {"BS"}, {SinkCategory::Log})};
    CHECK(risk_value(bs, {"CG", "CC"}) == 0);
    CHECK(risk_value(bs, {"BS"}) == 7 * 3);
    CHECK_THROWS_AS(risk_value(bs, {}), DomainError);
  }

  TEST_CASE("detectability and flow counts") {
    const std::vector<MisuseTuple> ts{tuple(12, {"CC", "CG"}, {SinkCategory::Network, SinkCategory::Network}),
                                      tuple(12, {"BI"}, {SinkCategory::Network}, 2)};
    CHECK(detectability(ts, "CG", 12) == 1);
    CHECK(detectability(ts, "CC", 12) == 1);
    CHECK(detectability(ts, "CG", 13) == 0);
    CHECK(flow_count(ts, SinkCategory::Network, 12) == 3);
    CHECK(flow_count(ts, SinkCategory::File, 12) == 0);
  }

  TEST_CASE("risk equals the literal formula on random tuple sets") {
    std::mt19937_64 rng(17);
    const std::vector<std::set<std::string>> chains{{"CG", "CC"}, {"CG"}, {"BS"}, {"BI", "CC", "CG"}};
    for (int i = 0; i < 300; ++i) {
      std::vector<MisuseTuple> ts;
      for (int n = static_cast<int>(rng() % 8); n > 0; --n) ts.push_back(random_tuple(rng));
      for (const auto& chain : chains) {
        CHECK(testsupport::Rational(risk_value(ts, chain)) == testsupport::risk_oracle(ts, chain));
      }
    }
  }

  TEST_CASE("risk is monotone in flows and in the chain") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 200; ++i) {
      std::vector<MisuseTuple> ts;
      for (int n = 1 + static_cast<int>(rng() % 6); n > 0; --n) ts.push_back(random_tuple(rng));
      const auto base = risk_value(ts, {"CG"});
      CHECK(base >= 0);
      CHECK(risk_value(ts, {"CG", "CC"}) >= base);
      auto more = ts;
      more[0].S.push_back(SinkCategory::Network);
      CHECK(risk_value(more, {"CG"}) >= base);
    }
  }

  TEST_CASE("strict majority acceptance") {
    CHECK(accepts(2, 3));
    CHECK_FALSE(accepts(1, 2));
    CHECK(accepts(1, 1));
    CHECK_FALSE(accepts(0, 0));
    CHECK(accepts(1, 2, Fraction(1, 3)));
    // Exhaustive over reporter subsets for capability sets of size 1..4.
    for (std::size_t capable = 1; capable <= 4; ++capable) {
      CapabilityMatrix m;
      std::set<std::string> chain;
      for (std::size_t d = 0; d < 5; ++d) {
        const std::string name = "D" + std::to_string(d);
        chain.insert(name);
        m.register_detector(name, d < capable ? std::set<int>{12} : std::set<int>{13});
      }
      for (unsigned mask = 1; mask < 32; ++mask) {
        std::map<std::string, std::vector<MisuseTuple>> by;
        std::size_t capable_reporters = 0;
        for (std::size_t d = 0; d < 5; ++d) {
          if (!(mask >> d & 1)) continue;
          const std::string name = "D" + std::to_string(d);
          by[name].push_back(tuple(12, {name}, {}));
          capable_reporters += d < capable;
        }
        const auto v = vote(by, m, chain);
        const bool expected = capable_reporters * 2 > capable;
        CAPTURE(capable);
        CAPTURE(mask);
        CHECK(v.expected.size() == (expected ? 1u : 0u));
        CHECK(v.rejected.size() == (expected ? 0u : 1u));
      }
    }
  }

  TEST_CASE("vote merges reporters and respects the chain") {
    std::map<std::string, std::vector<MisuseTuple>> by;
    by["CG"].push_back(tuple(12, {"CG"}, {SinkCategory::File}));
    by["CC"].push_back(tuple(12, {"CC"}, {SinkCategory::File}));
    by["BS"].push_back(tuple(12, {"BS"}, {SinkCategory::File}));
    by["CG"].push_back(tuple(4, {"CG"}, {}, 9));
    const auto v = vote(by, caps(), {"CG", "CC", "BS"});
    REQUIRE(v.expected.size() == 2);
    CHECK(v.expected[0].id == 4);  // CG alone is the only capable detector for 4
    CHECK(v.expected[1].reporters == std::set<std::string>{"BS", "CC", "CG"});
    // 1 of {CG, CC} for id 12 is not a strict majority.
    std::map<std::string, std::vector<MisuseTuple>> single{{"CG", {tuple(12, {"CG"}, {})}}};
    CHECK(vote(single, caps(), {"CG", "CC"}).rejected.size() == 1);
    // Outside the chain nobody is capable.
    CHECK(vote(single, caps(), {"BS"}).rejected.size() == 1);
  }

  TEST_CASE("chain precision") {
    const std::vector<MisuseTuple> detected{tuple(12, {"CG"}, {}), tuple(17, {"CG"}, {}, 3)};
    const std::vector<MisuseTuple> expected{tuple(12, {"CG", "CC"}, {})};
    CHECK(chain_precision(detected, expected) == Fraction(1, 2));
    CHECK(chain_precision({}, expected) == Fraction(1));
  }

  TEST_CASE("report json round trip and tamper detection") {
    std::vector<MisuseTuple> ex{tuple(12, {"CC", "CG"}, {SinkCategory::Network, SinkCategory::File}),
                                tuple(17, {"BI"}, {SinkCategory::Log}, 4)};
    const auto r = build_report("app", ex, {tuple(1, {"CG"}, {}, 7)}, {"CG", "CC"}, {"CG", "CC", "BI"});
    CHECK(r.risk == 105);  // id 17 came only from BI, outside the chain
    CHECK(r.flag("CG", 12) == 1);
    CHECK(r.flag("BI", 17) == 1);
    CHECK(r.flows(SinkCategory::Network, 12) == 1);
    CHECK(recompute_risk(r) == r.risk);
    const auto doc = to_json(r);
    CHECK(doc["report_version"] == kReportVersion);
    CHECK(doc["chain"] == nlohmann::json{"CC", "CG"});
    CHECK(doc["vote_chain"] == nlohmann::json{"BI", "CC", "CG"});
    CHECK(report_from_json(doc) == r);
    auto tampered = doc;
    tampered["risk"] = 1;
    CHECK_THROWS_AS(report_from_json(tampered), InvariantError);
    auto broken = doc;
    broken.erase("n");
    CHECK_THROWS_AS(report_from_json(broken), ParseError);

    const auto header = csv_header(r.chain);
    CHECK(std::count(header.begin(), header.end(), ',') == 1 + 2 * 21 + 9 * 21);
    const auto row = csv_row(r);
    CHECK(std::count(row.begin(), row.end(), ',') == 1 + 2 * 21 + 9 * 21);
    CHECK(row.starts_with("app,105,"));
  }
}

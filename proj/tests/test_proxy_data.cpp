#include <doctest.h>

#include <random>

#include "kgcal/errors.hpp"
#include "kgcal/proxy_data.hpp"
#include "support/worlds.hpp"

using namespace kgcal;

namespace {

const char* const kSnoopyTarget = "<PATH confidence=0.75>sibling_of<CONSTRAINT>gender<SEP>male</CONSTRAINT></PATH>";

NamedPath named(std::initializer_list<const char*> rels, std::optional<NamedConstraint> c = std::nullopt) {
  NamedPath p;
  for (const char* r : rels) p.steps.push_back({r, Direction::forward});
  p.constraint = std::move(c);
  return p;
}

}  // namespace

TEST_CASE("serialize_evidence examples") {
  CHECK(serialize_evidence(named({"sibling_of"}, NamedConstraint{"gender", "male"}), 0.75) == kSnoopyTarget);
  CHECK(serialize_evidence(named({"r1", "r2"}), 0.5) == "<PATH confidence=0.50>r1<SEP>r2</PATH>");
  CHECK_THROWS_AS(serialize_evidence(NamedPath{}, 0.5), SerializationError);
  CHECK(serialize_evidence(NamedPath{{{"gender", Direction::inverse}}, std::nullopt}, 1.0) ==
        "<PATH confidence=1.00>~gender</PATH>");
}

TEST_CASE("serialize_evidence rejects names that would not parse back") {
  CHECK_THROWS_AS(serialize_evidence(named({"a<SEP>b"}), 0.5), SerializationError);
  CHECK_THROWS_AS(serialize_evidence(named({" a"}), 0.5), SerializationError);
  CHECK_THROWS_AS(serialize_evidence(named({"~a"}), 0.5), SerializationError);
  CHECK_THROWS_AS(serialize_evidence(named({"a"}, NamedConstraint{"r", "x</PATH>"}), 0.5), SerializationError);
  CHECK_THROWS_AS(serialize_evidence(named({"a"}), 1.5), SerializationError);
}

TEST_CASE("format_confidence uses two decimals") {
  CHECK(format_confidence(0.75) == "0.75");
  CHECK(format_confidence(0.5) == "0.50");
  CHECK(format_confidence(0.0) == "0.00");
  CHECK(format_confidence(2.0 / 3.0) == "0.67");
}

TEST_CASE("parse_evidence examples") {
  SUBCASE("template example with loose whitespace") {
    const auto e = parse_evidence("<PATH confidence=0.75>sibling_of <CONSTRAINT>gender<SEP>male </CONSTRAINT></PATH>");
    CHECK(e.confidence == 0.75);
    CHECK(e.path == named({"sibling_of"}, NamedConstraint{"gender", "male"}));
  }
  SUBCASE("exact target") {
    const auto e = parse_evidence(kSnoopyTarget);
    CHECK(e.path == named({"sibling_of"}, NamedConstraint{"gender", "male"}));
  }
  SUBCASE("minimal form") {
    const auto e = parse_evidence("<PATH confidence=0.5>r1</PATH>");
    CHECK(e.confidence == 0.5);
    CHECK(e.path == named({"r1"}));
  }
  SUBCASE("surrounding prose is ignored") {
    const auto e = parse_evidence("Sure! <PATH confidence=0.30>r1<SEP>~r2</PATH> hope this helps");
    CHECK(e.path.steps == std::vector<NamedStep>{{"r1", Direction::forward}, {"r2", Direction::inverse}});
  }
  SUBCASE("invalid outputs") {
    for (const char* bad : {"here is the answer: r1, r2", "<PATH confidence=0.5>r1", "<PATH confidence=1.5>r1</PATH>",
                            "<PATH confidence=abc>r1</PATH>", "<PATH confidence=-0.1>r1</PATH>",
                            "<PATH confidence=0.5>r1<CONSTRAINT>g<SEP>m</PATH>", "<PATH confidence=0.5></PATH>",
                            "<PATH confidence=0.5>r1<CONSTRAINT>g</CONSTRAINT></PATH>", "<PATH>r1</PATH>",
                            "<PATH confidence=0.5>r1<SEP><SEP>r2</PATH>"}) {
      CAPTURE(bad);
      CHECK_THROWS_AS(parse_evidence(bad), InvalidOutput);
    }
  }
}

TEST_CASE("property: serialize then parse round-trips") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> len(1, 5), pick(0, 9), coin(0, 2);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    NamedPath p;
    for (int i = len(rng); i > 0; --i) {
      p.steps.push_back({"rel." + std::to_string(pick(rng)), coin(rng) == 0 ? Direction::inverse : Direction::forward});
    }
    if (coin(rng) == 0) p.constraint = NamedConstraint{"c" + std::to_string(pick(rng)), "Ent " + std::to_string(pick(rng))};
    const double c = conf(rng);
    const auto back = parse_evidence(serialize_evidence(p, c));
    CHECK(back.path == p);
    CHECK(std::abs(back.confidence - c) <= 0.005);
  }
}

TEST_CASE("build_sft_dataset on the Snoopy question") {
  const auto g = testing::snoopy_world();
  const std::vector<QaItem> qa{testing::snoopy_question()};
  const auto ds = build_sft_dataset(g, qa, SftBuildOptions{});

  std::vector<std::string> targets;
  for (const auto& r : ds.records) {
    CHECK(r.instruction ==
          "Please generate a valid relation path that can be helpful for answering the following question: "
          "what is the name of snoopy's brother?");
    CHECK(r.question_id == "q1");
    targets.push_back(r.target);
  }
  CHECK(std::find(targets.begin(), targets.end(), kSnoopyTarget) != targets.end());
  CHECK(std::find(targets.begin(), targets.end(), "<PATH confidence=0.50>sibling_of</PATH>") != targets.end());
  CHECK(targets.size() == 2);
  CHECK(ds.skipped.empty());

  bool saw_female = false;
  for (const auto& d : ds.decisions) {
    CHECK(d.base_confidence == 0.5);
    if (d.constraint.entity == "female") {
      saw_female = true;
      CHECK(d.constrained_confidence == 0.25);
      CHECK_FALSE(d.retained);
    }
    if (d.constraint.entity == "male") {
      CHECK(d.constrained_confidence == 0.75);
      CHECK(d.retained);
    }
  }
  // Belle is not a gold answer, so (gender, female) is never mined.
  CHECK_FALSE(saw_female);
}

TEST_CASE("rejected constraint is scored but not emitted") {
  // Both siblings are gold, so either gender constraint only narrows a perfect base.
  const auto g = testing::snoopy_world();
  const std::vector<QaItem> qa{{"q2", "sister?", {"Snoopy"}, {"Spike", "Belle"}}};
  const auto ds = build_sft_dataset(g, qa, SftBuildOptions{});
  REQUIRE(ds.decisions.size() == 2);
  for (const auto& d : ds.decisions) {
    CHECK(d.base_confidence == doctest::Approx(2.5 / 3.0));
    CHECK(d.constrained_confidence == 0.75);
    CHECK_FALSE(d.retained);
  }
  REQUIRE(ds.records.size() == 1);
  CHECK(ds.records[0].target == "<PATH confidence=0.83>sibling_of</PATH>");
}

TEST_CASE("build_sft_dataset skips unreachable and empty questions") {
  const auto g = testing::snoopy_world();
  const std::vector<QaItem> qa{{"far", "?", {"Spike"}, {"Belle"}}, {"none", "?", {"Snoopy"}, {}},
                               {"ghost", "?", {"Nobody"}, {"Spike"}}};
  const auto ds = build_sft_dataset(g, qa, SftBuildOptions{});
  CHECK(ds.records.empty());
  CHECK(ds.skipped.size() == 3);
}

TEST_CASE("the female constraint would be rejected against the base") {
  const auto g = testing::snoopy_world();
  const auto snoopy = *g.find_entity("Snoopy");
  ConstrainedPath p;
  p.steps.push_back({*g.find_relation("sibling_of"), Direction::forward});
  const std::vector<EntityId> gold{*g.find_entity("Spike")};
  const double base = evidence_confidence(BetaPrior{}, ground(g, snoopy, p).candidates, gold);
  p.constraint = Constraint{*g.find_relation("gender"), *g.find_entity("female")};
  const double female = evidence_confidence(BetaPrior{}, ground(g, snoopy, p).candidates, gold);
  CHECK(female == 0.25);
  CHECK_FALSE(female > base);
}

TEST_CASE("RL stage and QA records") {
  const auto g = testing::snoopy_world();
  const std::vector<QaItem> qa{testing::snoopy_question()};
  SftBuildOptions opts;
  opts.stage = Stage::rl;
  opts.with_qa_records = true;
  const auto ds = build_sft_dataset(g, qa, opts);
  REQUIRE(ds.records.size() == 3);
  CHECK(ds.records[0].instruction.starts_with(
      "Please generate an enhanced relation path with well-calibrated confidence that can be helpful for answering"));
  CHECK(ds.records.back().target == "Spike");
}

TEST_CASE("build_sft_dataset is deterministic across concurrency") {
  const auto w = testing::family_world(30, 3);
  const auto g = KnowledgeGraph::from_triples(w.triples);
  SftBuildOptions one, many;
  many.concurrency = 8;
  const auto a = build_sft_dataset(g, w.qa, one);
  const auto b = build_sft_dataset(g, w.qa, many);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].target == b.records[i].target);
    CHECK(a.records[i].question_id == b.records[i].question_id);
  }
  CHECK(a.decisions.size() == b.decisions.size());
}

TEST_CASE("property: retained constraints strictly improve confidence") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = testing::family_world(10, seed);
    const auto ds = build_sft_dataset(KnowledgeGraph::from_triples(w.triples), w.qa, SftBuildOptions{});
    for (const auto& d : ds.decisions) {
      CHECK(d.retained == (d.constrained_confidence > d.base_confidence));
    }
  }
}

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgcal/calibration.hpp"
#include "kgcal/errors.hpp"
#include "kgcal/evidence.hpp"
#include "kgcal/log.hpp"
#include "kgcal/metrics.hpp"
#include "kgcal/pipeline.hpp"
#include "kgcal/proxy_data.hpp"
#include "kgcal/reward.hpp"
#include "support/worlds.hpp"

using namespace kgcal;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Criterion 1: worked Snoopy example, exact values, < 1 ms.
Outcome snoopy_confidence() {
  Outcome out;
  const auto start = Clock::now();
  const auto g = testing::snoopy_world();
  const auto snoopy = *g.find_entity("Snoopy");
  const std::vector<EntityId> gold{*g.find_entity("Spike")};
  ConstrainedPath base;
  base.steps.push_back({*g.find_relation("sibling_of"), Direction::forward});
  ConstrainedPath constrained = base;
  constrained.constraint = Constraint{*g.find_relation("gender"), *g.find_entity("male")};
  const BetaPrior prior(0.5, 0.5);
  const double c_base = evidence_confidence(prior, ground(g, snoopy, base).candidates, gold);
  const double c_constrained = evidence_confidence(prior, ground(g, snoopy, constrained).candidates, gold);
  const double elapsed = seconds_since(start);

  out.require(c_base == 0.5, "base confidence " + std::to_string(c_base));
  out.require(c_constrained == 0.75, "constrained confidence " + std::to_string(c_constrained));
  out.require(elapsed < 1e-3, "took " + std::to_string(elapsed * 1e3) + " ms");
  out.detail = out.ok ? "0.5 / 0.75 in " + std::to_string(elapsed * 1e6) + " us" : out.detail;
  return out;
}

// Criterion 2: byte-exact SFT target.
Outcome sft_template() {
  Outcome out;
  const std::string expected = "<PATH confidence=0.75>sibling_of<CONSTRAINT>gender<SEP>male</CONSTRAINT></PATH>";
  const auto g = testing::snoopy_world();
  const std::vector<QaItem> qa{testing::snoopy_question()};
  const auto ds = build_sft_dataset(g, qa, SftBuildOptions{});
  const bool found = std::any_of(ds.records.begin(), ds.records.end(),
                                 [&](const SftRecord& r) { return r.target == expected; });
  out.require(found, "target string not emitted");
  if (out.ok) out.detail = expected;
  return out;
}

NamedPath random_named_path(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(1, 4), pick(0, 5), coin(0, 2);
  NamedPath p;
  for (int i = len(rng); i > 0; --i) {
    p.steps.push_back({"r" + std::to_string(pick(rng)), coin(rng) == 0 ? Direction::inverse : Direction::forward});
  }
  if (coin(rng) == 0) p.constraint = NamedConstraint{"c" + std::to_string(pick(rng) % 3), "e" + std::to_string(pick(rng))};
  return p;
}

// Criterion 3: reward contract.
Outcome reward_contract() {
  Outcome out;
  const auto start = Clock::now();
  const RewardConfig cfg;
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> n_gold(1, 4);

  const std::vector<EvidenceRecord> one_gold{{"q", "x", random_named_path(rng), 0.5, {}, 1.0}};
  for (const char* bad : {"", "plain prose", "<PATH confidence=2>r</PATH>", "<PATH confidence=0.5>r"}) {
    const double r = reward_for_output(bad, one_gold, cfg).smoothed;
    out.require(r == -3.0, std::string("invalid output scored ") + std::to_string(r));
  }

  for (int i = 0; i < 10000 && out.ok; ++i) {
    std::vector<EvidenceRecord> gold;
    for (int k = n_gold(rng); k > 0; --k) gold.push_back({"q", "x", random_named_path(rng), u(rng), {}, u(rng)});
    const auto raw = serialize_evidence(random_named_path(rng), u(rng));
    const auto r = reward_for_output(raw, gold, cfg);
    out.require(r.valid, "valid output rejected: " + raw);
    out.require(r.combined >= 0.0 && r.combined <= 1.0, "combined out of range: " + std::to_string(r.combined));
    out.require(r.smoothed > -1.0 && r.smoothed < 2.0, "smoothed out of range: " + std::to_string(r.smoothed));
  }

  out.require(smooth_reward(0.5, cfg.xi_prime) == 0.5, "smoothed(0.5) != 0.5");

  for (double m : {0.0, 0.3, 0.77, 1.0}) {
    for (double p : {0.0, 0.25, 0.5, 0.8, 1.0}) {
      const double target = p * m;
      const double at_target = score_against_gold(m, 1.0, p, target, cfg).r_cal;
      std::size_t argmax = 0;
      double best = -1.0;
      for (std::size_t i = 0; i <= 100; ++i) {
        const double c_hat = static_cast<double>(i) / 100.0;
        const double r = score_against_gold(m, 1.0, p, c_hat, cfg).r_cal;
        out.require(r <= at_target, "grid point beats the target confidence");
        if (r > best) {
          best = r;
          argmax = i;
        }
      }
      // The grid optimum sits on the grid point nearest the target.
      out.require(std::abs(static_cast<double>(argmax) / 100.0 - target) <= 0.005 + 1e-12,
                  "grid argmax " + std::to_string(argmax) + " far from " + std::to_string(target));
      out.require(at_target == 1.0, "R_cal at target != 1");
    }
  }

  const double elapsed = seconds_since(start);
  out.require(elapsed < 5.0, "took " + std::to_string(elapsed) + " s");
  if (out.ok) out.detail = "10000 pairs in " + std::to_string(elapsed) + " s";
  return out;
}

// Criterion 4: ground == brute-force walk enumeration.
Outcome grounding_oracle() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(404);
  std::size_t cases = 0;
  for (int graph = 0; graph < 200 && out.ok; ++graph) {
    const std::size_t n_e = std::uniform_int_distribution<std::size_t>(2, 50)(rng);
    const std::size_t n_r = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    const std::size_t n_t = std::uniform_int_distribution<std::size_t>(1, 3 * n_e)(rng);
    const auto g = KnowledgeGraph::from_triples(testing::random_triples(rng, n_e, n_r, n_t));
    std::uniform_int_distribution<EntityId> ent(0, static_cast<EntityId>(g.num_entities() - 1));
    std::uniform_int_distribution<RelationId> rel(0, static_cast<RelationId>(g.num_relations() - 1));
    std::uniform_int_distribution<int> len(0, 4), dir(0, 3), coin(0, 2);
    for (int k = 0; k < 50; ++k) {
      ConstrainedPath p;
      for (int i = len(rng); i > 0; --i) {
        p.steps.push_back({rel(rng), dir(rng) == 0 ? Direction::inverse : Direction::forward});
      }
      if (coin(rng) == 0) p.constraint = Constraint{rel(rng), ent(rng)};
      const auto q = ent(rng);
      ++cases;
      if (ground(g, q, p).candidates != testing::brute_ground(g, q, p)) {
        out.require(false, "mismatch on graph " + std::to_string(graph));
        break;
      }
    }
  }
  const double elapsed = seconds_since(start);
  out.require(elapsed < 30.0, "took " + std::to_string(elapsed) + " s");
  if (out.ok) out.detail = std::to_string(cases) + " cases in " + std::to_string(elapsed) + " s";
  return out;
}

// Criterion 5: constraint filtering, checked against an oracle built from
// exhaustive path enumeration and linear triple scans.
Outcome constraint_soundness() {
  Outcome out;
  std::mt19937_64 rng(505);
  const BetaPrior prior;
  std::size_t n_retained = 0, n_rejected = 0;
  for (int world = 0; world < 100 && out.ok; ++world) {
    const std::size_t n_e = std::uniform_int_distribution<std::size_t>(4, 14)(rng);
    const std::size_t n_r = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    auto triples = testing::random_triples(rng, n_e, n_r, 3 * n_e);
    // Attribute facts give the miner something to find.
    for (std::size_t e = 0; e < n_e; ++e) {
      triples.push_back({"e" + std::to_string(e), "kind", "k" + std::to_string(rng() % 2)});
    }
    const auto g = KnowledgeGraph::from_triples(triples);

    std::vector<QaItem> qa;
    std::uniform_int_distribution<std::size_t> pick(0, n_e - 1);
    for (int i = 0; i < 5; ++i) {
      QaItem item{"w" + std::to_string(world) + "q" + std::to_string(i), "?", {"e" + std::to_string(pick(rng))}, {}};
      for (int a = 1 + static_cast<int>(rng() % 3); a > 0; --a) item.answers.push_back("e" + std::to_string(pick(rng)));
      qa.push_back(std::move(item));
    }

    SftBuildOptions opts;
    opts.search.max_paths = 1u << 20;
    const auto ds = build_sft_dataset(g, qa, opts);

    using Key = std::tuple<std::string, NamedPath, NamedConstraint>;
    std::map<Key, bool> got;
    for (const auto& d : ds.decisions) {
      out.require(d.retained == (d.constrained_confidence > d.base_confidence), "decision disagrees with its scores");
      got[{d.question_id, d.base, d.constraint}] = d.retained;
    }

    std::map<Key, bool> expected;
    for (const auto& item : qa) {
      const auto q = g.find_entity(item.entities[0]);
      if (!q) continue;
      std::set<EntityId> gold;
      for (const auto& a : item.answers) {
        if (auto id = g.find_entity(a)) gold.insert(*id);
      }
      std::set<ConstrainedPath> bases;
      for (EntityId a : gold) {
        for (auto& p : testing::brute_shortest_paths(g, *q, a, opts.search.max_depth, false)) {
          if (!p.steps.empty()) bases.insert(p);
        }
      }
      const auto conf = [&](const std::vector<EntityId>& grounded) {
        std::size_t hits = 0;
        for (EntityId e : grounded) hits += gold.count(e);
        return (prior.alpha() + static_cast<double>(hits)) /
               (prior.alpha() + prior.beta() + static_cast<double>(grounded.size()));
      };
      for (const auto& base : bases) {
        const auto grounded = testing::brute_ground(g, *q, base);
        const double base_conf = conf(grounded);
        std::set<std::pair<RelationId, EntityId>> mined;
        for (const auto& t : g.triples()) {
          if (gold.count(t.head) && std::binary_search(grounded.begin(), grounded.end(), t.head)) {
            mined.insert({t.relation, t.tail});
          }
        }
        for (const auto& [r, e] : mined) {
          ConstrainedPath c = base;
          c.constraint = Constraint{r, e};
          const bool improves = conf(testing::brute_ground(g, *q, c)) > base_conf;
          expected[{item.id, to_named(g, base), NamedConstraint{g.relation_name(r), g.entity_name(e)}}] = improves;
          improves ? ++n_retained : ++n_rejected;
        }
      }
    }
    out.require(got == expected, "decisions differ from the oracle in world " + std::to_string(world));

    std::set<std::string> targets;
    for (const auto& r : ds.records) targets.insert(r.target);
    for (const auto& e : ds.evidence) {
      if (!e.path.constraint) continue;
      const auto it = got.find({e.question_id, NamedPath{e.path.steps, std::nullopt}, *e.path.constraint});
      out.require(it != got.end() && it->second, "emitted constrained evidence was not retained");
    }
  }
  out.require(n_retained > 0 && n_rejected > 0, "oracle exercised only one branch");
  if (out.ok) {
    out.detail = std::to_string(n_retained) + " retained, " + std::to_string(n_rejected) + " rejected over 100 worlds";
  }
  return out;
}

// Criterion 6: ECE oracle.
Outcome ece_oracle() {
  Outcome out;
  std::mt19937_64 rng(606);

  // Perfectly calibrated: each occupied bin holds samples at one confidence
  // c = k/n with exactly k of n correct.
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<CalibrationSample> s;
    const int n = 1 + static_cast<int>(rng() % 10);
    for (int bin = 0; bin < 10; ++bin) {
      if (rng() % 2) continue;
      const int k = static_cast<int>(rng() % (n + 1));
      const double c = static_cast<double>(k) / n;
      const int reps = 1 + static_cast<int>(rng() % 3);
      for (int r = 0; r < reps; ++r) {
        for (int i = 0; i < n; ++i) s.push_back({c, i < k});
      }
    }
    if (s.empty()) s.push_back({1.0, true});
    const double e = ece(s).ece;
    out.require(std::abs(e) <= 1e-12, "calibrated set gave ECE " + std::to_string(e));
  }
  const std::vector<CalibrationSample> all_sure(25, {1.0, true});
  out.require(ece(all_sure).ece == 0.0, "all-correct at 1.0 not zero");

  const std::vector<CalibrationSample> four{{0.8, true}, {0.8, true}, {0.8, false}, {0.8, false}};
  const double e4 = ece(four).ece;
  out.require(std::abs(e4 - 0.3) <= 1e-15, "4-sample case gave " + std::to_string(e4));

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CalibrationSample> s(500);
  for (auto& x : s) {
    x.confidence = u(rng);
    x.correct = u(rng) < 0.6;
  }
  const double base = ece(s).ece;
  for (int i = 0; i < 1000; ++i) {
    std::shuffle(s.begin(), s.end(), rng);
    if (ece(s).ece != base) {
      out.require(false, "shuffle " + std::to_string(i) + " changed ECE");
      break;
    }
  }
  if (out.ok) out.detail = "calibrated sets 0, four-sample 0.3, 1000 shuffles stable";
  return out;
}

// Criterion 7: serialize/parse round-trip.
Outcome parser_roundtrip() {
  Outcome out;
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_named_path(rng);
    const double c = i == 0 ? 0.0 : i == 1 ? 1.0 : u(rng);
    const auto back = parse_evidence(serialize_evidence(p, c));
    out.require(back.path == p, "path changed on round-trip");
    out.require(std::abs(back.confidence - c) <= 0.005, "confidence drifted by " + std::to_string(back.confidence - c));
  }
  if (out.ok) out.detail = "1000 pairs";
  return out;
}

// Criterion 8: end-to-end determinism and calibration benefit.
Outcome pipeline_determinism() {
  Outcome out;
  const auto dir = testing::fresh_dir("acceptance_pipeline");
  const auto world = testing::family_world(20, 808);
  testing::write_world(world, dir / "kg.tsv", dir / "qa.jsonl");

  PipelineConfig cfg;
  cfg.http = HttpReasonerConfig{};
  const auto run = [&](const PipelineConfig& c, const std::string& name) {
    std::ostringstream log;
    const int status = run_pipeline(c, {dir / "kg.tsv", dir / "qa.jsonl", dir / name, std::nullopt}, log);
    out.require(status == 0, name + " exited " + std::to_string(status) + ": " + log.str());
    return nlohmann::json::parse(testing::read_file(dir / name / "report.json"));
  };

  const auto first = run(cfg, "run1");
  run(cfg, "run2");
  for (const char* f : {"evidence.jsonl", "sft.jsonl", "predictions.jsonl", "report.json", "reliability.csv"}) {
    const auto a = testing::read_file(dir / "run1" / f);
    out.require(!a.empty(), std::string(f) + " is empty");
    out.require(a == testing::read_file(dir / "run2" / f), std::string(f) + " differs between runs");
  }

  auto forced = cfg;
  forced.mock_force_confidence = 1.0;
  const auto baseline = run(forced, "forced");
  if (!out.ok) return out;
  const double e = first.at("ece").get<double>();
  const double e_forced = baseline.at("ece").get<double>();
  out.require(e < e_forced, "ECE " + std::to_string(e) + " not below forced " + std::to_string(e_forced));
  if (out.ok) out.detail = "byte-identical; ECE " + std::to_string(e) + " < forced " + std::to_string(e_forced);
  return out;
}

}  // namespace

int main() {
  log::set_level(log::Level::off);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 worked-example confidence", snoopy_confidence},
      {"2 SFT target byte-exact", sft_template},
      {"3 reward contract", reward_contract},
      {"4 grounding oracle equivalence", grounding_oracle},
      {"5 constraint-filter soundness", constraint_soundness},
      {"6 ECE oracle", ece_oracle},
      {"7 parser round-trip", parser_roundtrip},
      {"8 end-to-end determinism", pipeline_determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("threw: ") + e.what();
    }
    failures += o.ok ? 0 : 1;
    std::printf("%s  %s  (%s)\n", o.ok ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  }
  std::printf("NOTE  9 benchmark tables need hosted LLMs and a trained proxy; prompt fidelity is pinned by golden-file unit tests\n");
  return failures == 0 ? 0 : 1;
}

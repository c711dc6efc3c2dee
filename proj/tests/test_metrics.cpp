#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "seqset/metrics.hpp"
#include "seqset/rng.hpp"

using namespace seqset;

namespace {

using Pair = std::pair<std::vector<int>, std::vector<int>>;

// Independent recount used as the oracle: raw loops over sets, no shared code
// with the implementation.
EvalReport brute_force(const std::vector<Pair>& pairs) {
  EvalReport r;
  for (const auto& [pred, gold] : pairs) {
    std::set<int> ps(pred.begin(), pred.end());
    std::set<int> gs(gold.begin(), gold.end());
    for (int p : ps)
      if (gs.count(p))
        ++r.tp;
      else
        ++r.fp;
    for (int g : gs)
      if (!ps.count(g)) ++r.fn;
  }
  r.precision = (r.tp + r.fp) ? double(r.tp) / double(r.tp + r.fp) : 0.0;
  r.recall = (r.tp + r.fn) ? double(r.tp) / double(r.tp + r.fn) : 0.0;
  r.f1 = (r.precision + r.recall > 0)
             ? 2 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

}  // namespace

TEST_CASE("perfect prediction scores one across the board") {
  const std::vector<Pair> pairs = {{{1, 2, 3}, {1, 2, 3}}, {{4}, {4}}};
  const EvalReport r = micro_prf(pairs);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
  CHECK(r.fp == 0);
  CHECK(r.fn == 0);
}

TEST_CASE("partial overlap matches the hand-computed case") {
  // predicted {a,b,c} vs gold {b,c,d}: tp=2 fp=1 fn=1.
  const std::vector<Pair> pairs = {{{1, 2, 3}, {2, 3, 4}}};
  const EvalReport r = micro_prf(pairs);
  CHECK(r.tp == 2);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);
  CHECK(r.precision == Catch::Approx(2.0 / 3));
  CHECK(r.recall == Catch::Approx(2.0 / 3));
  CHECK(r.f1 == Catch::Approx(2.0 / 3));
}

TEST_CASE("empty prediction yields zeros, never NaN") {
  const std::vector<Pair> pairs = {{{}, {1, 2}}};
  const EvalReport r = micro_prf(pairs);
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.f1 == 0.0);
  CHECK(r.fn == 2);
}

TEST_CASE("micro averaging pools counts before the ratios") {
  // Two pairs whose per-pair F1 would average differently.
  const std::vector<Pair> pairs = {{{1}, {1}}, {{2, 3, 4, 5}, {9}}};
  const EvalReport r = micro_prf(pairs);
  CHECK(r.tp == 1);
  CHECK(r.fp == 4);
  CHECK(r.fn == 1);
  CHECK(r.precision == Catch::Approx(0.2));
  CHECK(r.recall == Catch::Approx(0.5));
}

TEST_CASE("micro_prf agrees with a brute-force recount on random corpora") {
  Rng rng(2024);
  for (int corpus = 0; corpus < 100; ++corpus) {
    std::vector<Pair> pairs;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<int> pred, gold;
      const std::size_t np = rng.below(8);
      const std::size_t ng = 1 + rng.below(7);
      for (std::size_t j = 0; j < np; ++j)
        pred.push_back(static_cast<int>(rng.below(12)));
      for (std::size_t j = 0; j < ng; ++j)
        gold.push_back(static_cast<int>(rng.below(12)));
      pairs.emplace_back(std::move(pred), std::move(gold));
    }
    const EvalReport got = micro_prf(pairs);
    const EvalReport want = brute_force(pairs);
    REQUIRE(got.tp == want.tp);
    REQUIRE(got.fp == want.fp);
    REQUIRE(got.fn == want.fn);
    REQUIRE(got.precision == Catch::Approx(want.precision).margin(1e-12));
    REQUIRE(got.recall == Catch::Approx(want.recall).margin(1e-12));
    REQUIRE(got.f1 == Catch::Approx(want.f1).margin(1e-12));
    REQUIRE((got.f1 == 0.0) == (got.tp == 0));
  }
}

TEST_CASE("micro_prf is invariant to ordering and to duplicates when deduping") {
  const std::vector<Pair> base = {{{3, 1, 2}, {2, 4, 1}}};
  const std::vector<Pair> shuffled = {{{2, 3, 1}, {1, 2, 4}}};
  const std::vector<Pair> duplicated = {{{3, 1, 1, 2, 3}, {2, 4, 1}}};
  const EvalReport a = micro_prf(base);
  const EvalReport b = micro_prf(shuffled);
  const EvalReport c = micro_prf(duplicated);
  CHECK(a.tp == b.tp);
  CHECK(a.fp == b.fp);
  CHECK(a.fn == b.fn);
  CHECK(a.tp == c.tp);
  CHECK(a.fp == c.fp);
  CHECK(a.fn == c.fn);
}

TEST_CASE("without dedup, repeats of a gold herb become false positives") {
  const std::vector<Pair> pairs = {{{1, 1, 2}, {1}}};
  const EvalReport r = micro_prf(pairs, false);
  CHECK(r.tp == 1);
  CHECK(r.fp == 2);
  CHECK(r.fn == 0);
  CHECK(r.precision == Catch::Approx(1.0 / 3));
  CHECK(r.recall == 1.0);
}

TEST_CASE("micro_prf rejects empty input and empty gold sets") {
  CHECK_THROWS_AS(micro_prf(std::vector<Pair>{}), InputError);
  const std::vector<Pair> pairs = {{{1}, {}}};
  CHECK_THROWS_AS(micro_prf(pairs), ContractError);
}

TEST_CASE("repetition rate counts repeats over raw emissions") {
  CHECK(repetition_rate<int>({{1, 2, 3}}) == 0.0);
  CHECK(repetition_rate<int>({{5, 5, 5, 5}}) == 0.75);
  CHECK(repetition_rate<int>({{1, 2, 1}, {3}}) == 0.25);
  CHECK(repetition_rate<int>({}) == 0.0);
  CHECK(repetition_rate<int>({{}, {}}) == 0.0);
}

TEST_CASE("report formatting is fixed width and deterministic") {
  EvalReport r;
  r.tp = 12;
  r.fp = 3;
  r.fn = 4;
  r.precision = 0.8;
  r.recall = 0.75;
  r.f1 = 0.774193548;
  const std::string text = format_report(r);
  CHECK(text.find("tp=12 fp=3 fn=4") != std::string::npos);
  CHECK(text.find("precision=0.800000") != std::string::npos);
  CHECK(text.find("f1=0.774194") != std::string::npos);
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "fcnseg/metrics.hpp"
#include "oracle.hpp"

using namespace fcnseg;

TEST_SUITE_BEGIN("metrics");

namespace {

SegmentationMask inverted(const SegmentationMask& m) {
  SegmentationMask out = m;
  for (auto& v : out.labels) v = v ? 0 : 1;
  return out;
}

MetricReport from_counts(uint64_t tp, uint64_t tn, uint64_t fp, uint64_t fn) {
  return compute_metrics(ConfusionCounts{tp, tn, fp, fn});
}

}  // namespace

TEST_CASE("confusion basics") {
  const auto m = oracle::random_mask(16, 16, 42);
  const auto self = confusion(m, m);
  CHECK(self.fp == 0);
  CHECK(self.fn == 0);
  CHECK(self.total() == 256);

  const auto comp = confusion(inverted(m), m);
  CHECK(comp.tp == 0);
  CHECK(comp.tn == 0);

  SegmentationMask other(8, 8);
  CHECK_THROWS_AS(confusion(m, other), std::invalid_argument);
}

TEST_CASE("confusion equals the double-loop count on random pairs") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = oracle::random_mask(64, 64, 2 * seed);
    const auto b = oracle::random_mask(64, 64, 2 * seed + 1);
    const auto got = confusion(a, b);
    const auto want = oracle::brute_metrics(a, b);
    CHECK(got.tp == want.tp);
    CHECK(got.tn == want.tn);
    CHECK(got.fp == want.fp);
    CHECK(got.fn == want.fn);
  }
}

TEST_CASE("hand-evaluated index values") {
  const auto r = from_counts(45, 45, 5, 5);
  CHECK(*r.mcc == 0.8);  // (45*45-5*5)/sqrt(50^4) exactly

  const auto p = from_counts(100, 50, 0, 0);
  CHECK(*p.jsi == 1.0);
  CHECK(*p.dsc == 1.0);
  CHECK(*p.sensitivity == 1.0);
  CHECK(*p.specificity == 1.0);
  CHECK(*p.mcc == 1.0);

  const auto q = from_counts(6, 88, 2, 4);
  CHECK(*q.jsi == 0.5);
  CHECK(*q.dsc == doctest::Approx(12.0 / 18.0).epsilon(1e-15));
  CHECK(*q.dsc == doctest::Approx(2.0 * *q.jsi / (1.0 + *q.jsi)).epsilon(1e-15));
}

TEST_CASE("degenerate denominators") {
  CHECK_THROWS_AS(from_counts(0, 0, 0, 0), std::invalid_argument);

  const auto all_bg = from_counts(0, 100, 0, 0);  // gt and pred all background
  CHECK(!all_bg.jsi.has_value());
  CHECK(!all_bg.dsc.has_value());
  CHECK(!all_bg.sensitivity.has_value());
  CHECK(*all_bg.specificity == 1.0);
  CHECK(*all_bg.mcc == 0.0);  // zero-factor convention

  const auto all_fg = from_counts(100, 0, 0, 0);
  CHECK(!all_fg.specificity.has_value());
  CHECK(*all_fg.mcc == 0.0);
}

TEST_CASE("jsi <= dsc and the dice-jaccard identity on random counts") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<uint64_t> d(1, 5000);
  for (int i = 0; i < 200; ++i) {
    const auto r = from_counts(d(rng), d(rng), d(rng), d(rng));
    REQUIRE(r.jsi.has_value());
    CHECK(*r.jsi >= 0.0);
    CHECK(*r.jsi <= *r.dsc);
    CHECK(*r.dsc <= 1.0);
    CHECK(*r.dsc == doctest::Approx(2.0 * *r.jsi / (1.0 + *r.jsi)).epsilon(1e-13));
    CHECK(*r.mcc >= -1.0);
    CHECK(*r.mcc <= 1.0);
  }
}

TEST_CASE("mcc is symmetric under tp<->tn, fp<->fn swap") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<uint64_t> d(0, 3000);
  for (int i = 0; i < 100; ++i) {
    const uint64_t tp = d(rng), tn = d(rng), fp = d(rng), fn = d(rng);
    if (tp + tn + fp + fn == 0) continue;
    CHECK(*from_counts(tp, tn, fp, fn).mcc == *from_counts(tn, tp, fn, fp).mcc);
  }
}

TEST_CASE("self-comparison of a two-class mask scores ones everywhere") {
  const auto m = oracle::random_mask(32, 32, 3);
  REQUIRE(m.foreground_count() > 0);
  REQUIRE(m.foreground_count() < m.pixels());
  const auto r = compute_metrics(confusion(m, m));
  CHECK(*r.jsi == 1.0);
  CHECK(*r.dsc == 1.0);
  CHECK(*r.sensitivity == 1.0);
  CHECK(*r.specificity == 1.0);
  CHECK(*r.mcc == 1.0);
}

TEST_CASE("indices equal the brute-force oracle exactly on random masks") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const auto pred = oracle::random_mask(64, 64, 3000 + 2 * seed, 0.3);
    const auto gt = oracle::random_mask(64, 64, 3001 + 2 * seed, 0.4);
    const auto got = compute_metrics(confusion(pred, gt));
    const auto want = oracle::brute_metrics(pred, gt);
    CHECK(*got.jsi == want.jsi);
    CHECK(*got.dsc == want.dsc);
    CHECK(*got.sensitivity == want.sens);
    CHECK(*got.specificity == want.spec);
    CHECK(*got.mcc == want.mcc);
  }
}

TEST_CASE("aggregate means, spread and exclusions") {
  const auto single = aggregate({from_counts(45, 45, 5, 5)});
  CHECK(single.mcc.mean == 0.8);
  CHECK(single.mcc.sd == 0.0);
  CHECK(single.images == 1);

  MetricReport a, b;
  a.jsi = 0.9;
  b.jsi = 0.95;
  a.counts = b.counts = ConfusionCounts{1, 1, 1, 1};
  const auto two = aggregate({a, b});
  CHECK(two.jsi.mean == doctest::Approx(0.925).epsilon(1e-15));
  CHECK(two.jsi.n == 2);

  const auto same = aggregate({a, a, a});
  CHECK(same.jsi.mean == *a.jsi);
  CHECK(same.jsi.sd == 0.0);

  MetricReport undef;
  undef.counts = ConfusionCounts{0, 4, 0, 0};
  undef.specificity = 1.0;
  const auto mixed = aggregate({a, undef});
  CHECK(mixed.jsi.n == 1);
  CHECK(mixed.jsi.excluded == 1);
  CHECK(mixed.jsi.mean == 0.9);

  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_SUITE_END();

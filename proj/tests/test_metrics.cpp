#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cascade/metrics.h"
#include "cascade/synth.h"
#include "test_support.h"

using namespace cascade;
using cascade::testing::make_post;

namespace {

std::vector<std::int64_t> hours(std::initializer_list<double> h) {
  std::vector<std::int64_t> out;
  for (double x : h) out.push_back(static_cast<std::int64_t>(std::llround(x * 3600.0)));
  return out;
}

std::vector<const PostRecord*> refs(const std::vector<PostRecord>& posts) {
  std::vector<const PostRecord*> out;
  for (const auto& p : posts) out.push_back(&p);
  return out;
}

}  // namespace

TEST_CASE("structural virality small cases") {
  CHECK(structural_virality(testing::chain(1)) == 0.0);
  CHECK(structural_virality(testing::chain(2)) == 1.0);
  CHECK(structural_virality(testing::chain(3)) == doctest::Approx(4.0 / 3.0));
  CHECK(structural_virality(testing::star(4)) == doctest::Approx(1.5));
}

TEST_CASE("structural virality matches the BFS oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = testing::random_tree(1 + uniform_index(rng, 120), rng);
    const auto edges = g.edges();
    const double expected = oracle_wiener(g.size(), edges);
    CHECK(structural_virality(g) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("chain wiener index equals C(n+1, 3)") {
  for (std::uint64_t n = 2; n <= 100; ++n) {
    CHECK(wiener_index(testing::chain(n)) == (n + 1) * n * (n - 1) / 6);
  }
}

TEST_CASE("vai formula") {
  CHECK(vai(100, 50, 9.0) == 15.0);
  CHECK(vai(0, 0, 123.0) == 0.0);
  CHECK(vai(10, 5, 0.0) == 15.0);
  CHECK(vai(10, 10, 3.0, {2.0, 2.0, 1.0}) == doctest::Approx(30.0 / 16.0));
  CHECK_THROWS_AS(vai(-1, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(vai(1, -1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(vai(1, 1, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(vai(1, 1, 1.0, {1.0, 1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("vai monotonicity") {
  Rng rng(21);
  for (int i = 0; i < 2000; ++i) {
    const auto s = static_cast<std::int64_t>(uniform_index(rng, 100000));
    const auto c = static_cast<std::int64_t>(uniform_index(rng, 10000));
    const double age = uniform01(rng) * 1000.0;
    if (s + c > 0) CHECK(vai(s, c, age) > vai(s, c, age + 0.5));
    CHECK(vai(s + 1, c, age) > vai(s, c, age));
    CHECK(vai(s, c + 1, age) > vai(s, c, age));
  }
}

TEST_CASE("engagement ratio") {
  CHECK(engagement_ratio(10, 0) == 10.0);
  CHECK(engagement_ratio(0, 500) == 0.0);
  CHECK(engagement_ratio(250, 1000) == 0.25);
}

TEST_CASE("temporal metrics") {
  const auto two = temporal_metrics(hours({0, 5}));
  CHECK(two.time_to_first_repost_hr == 5.0);
  CHECK(two.lifespan_hr == 5.0);
  CHECK(two.avg_repost_delay_hr == 5.0);

  const auto one = temporal_metrics(hours({3}));
  CHECK(one.lifespan_hr == 0.0);
  CHECK_FALSE(one.time_to_first_repost_hr);
  CHECK_FALSE(one.avg_repost_delay_hr);
  CHECK_FALSE(one.peak_repost_speed_hr);

  const auto burst = temporal_metrics(hours({0, 1, 2, 50}), 24.0);
  CHECK(burst.peak_repost_speed_hr == 1.5);
  CHECK(burst.avg_repost_delay_hr == doctest::Approx(50.0 / 3.0));

  // Equal counts: the earliest window wins.
  const auto tie = temporal_metrics(hours({0, 10, 100}), 24.0);
  CHECK(tie.peak_repost_speed_hr == 10.0);
  const auto narrow = temporal_metrics(hours({0, 1, 2, 50, 50.5, 51}), 24.0);
  CHECK(narrow.peak_repost_speed_hr == 50.5);

  CHECK_THROWS_AS(temporal_metrics(std::vector<std::int64_t>{}), std::invalid_argument);
  CHECK_THROWS_AS(temporal_metrics(hours({0, 1}), 0.0), std::invalid_argument);
}

TEST_CASE("peak repost speed matches a brute-force window scan") {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 15);
    std::vector<std::int64_t> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back(static_cast<std::int64_t>(uniform_index(rng, 100)) * 1800);
    std::sort(t.begin(), t.end());
    const double w = 1.0 + static_cast<double>(uniform_index(rng, 30));
    // Brute force: every window starting at a repost; earliest densest wins.
    std::size_t best = 0;
    double center = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      std::size_t last = i;
      for (std::size_t j = i; j < n; ++j) {
        if (static_cast<double>(t[j] - t[i]) <= w * 3600.0) last = j;
      }
      if (last - i + 1 > best) {
        best = last - i + 1;
        center = 0.5 * static_cast<double>(t[i] + t[last] - 2 * t[0]) / 3600.0;
      }
    }
    CHECK(temporal_metrics(t, w).peak_repost_speed_hr == doctest::Approx(center));
  }
}

TEST_CASE("content entropy") {
  std::vector<PostRecord> same = {make_post("a", 1), make_post("b", 2)};
  same[0].title = "Hello";
  same[1].title = "hello";
  CHECK(content_entropy(refs(same)).text_bits == 0.0);

  std::vector<PostRecord> two = same;
  two[1].title = "other";
  CHECK(content_entropy(refs(two)).text_bits == doctest::Approx(1.0));

  std::vector<PostRecord> four = {make_post("a", 1), make_post("b", 2), make_post("c", 3), make_post("d", 4)};
  four[0].title = "a";
  four[1].title = "a";
  four[2].title = "b";
  four[3].title = "c";
  four[0].image_url = "u1";
  four[1].image_url = "u2";
  CHECK(content_entropy(refs(four)).text_bits == doctest::Approx(1.5));
  // u1, u2 and two URL-less posts pooled together.
  CHECK(content_entropy(refs(four)).image_bits == doctest::Approx(1.5));
}

TEST_CASE("cascade summary") {
  auto single = make_post("x", 100, "s1");
  single.score = 7;
  const auto g1 = build_repost_graph(std::vector{single});
  const auto m1 = cascade_summary(std::vector{single}, g1);
  CHECK(m1.size == 1);
  CHECK(m1.structural_virality == 0.0);
  CHECK(m1.depth == 0);
  CHECK(m1.num_subreddits == 1);
  CHECK(m1.total_upvotes == 7);
  CHECK_FALSE(m1.time_to_first_repost_hr);
  CHECK_FALSE(m1.peak_repost_speed_hr);

  const std::vector<PostRecord> pair = {make_post("a", 0, "s1"), make_post("b", 3600, "s2")};
  const auto m2 = cascade_summary(pair, build_repost_graph(pair));
  CHECK(m2.num_subreddits == 2);
  CHECK(m2.depth == 1);
  CHECK(m2.structural_virality == 1.0);
  CHECK(m2.lifespan_hr == 1.0);

  std::vector<PostRecord> three = {make_post("a", 0), make_post("b", 1), make_post("c", 2)};
  three[1].genai_flag = true;
  const auto m3 = cascade_summary(three, build_repost_graph(three));
  CHECK(m3.genai_cascade_flag);
  CHECK_FALSE(m3.misinfo_cascade_flag);
  CHECK(m3.max_branch == 1.0);

  const std::vector<PostRecord> other = {make_post("z", 0)};
  CHECK_THROWS_AS(cascade_summary(other, build_repost_graph(three)), std::invalid_argument);
}

TEST_CASE("top-quantile labels") {
  std::vector<double> v;
  for (int i = 1; i <= 10; ++i) v.push_back(i);
  const auto l = label_top_quantile(v, 0.2);
  for (int i = 0; i < 10; ++i) CHECK(l[i] == (i >= 8));
  const std::vector<double> same(7, 3.0);
  for (bool b : label_top_quantile(same, 0.2)) CHECK(b);
  CHECK(label_top_quantile(std::vector<double>{4.0}, 0.2) == std::vector<bool>{true});
  CHECK_THROWS_AS(label_top_quantile(std::vector<double>{}, 0.2), std::invalid_argument);

  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 60);
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) values.push_back(static_cast<double>(uniform_index(rng, 10)));
    const auto labels = label_top_quantile(values, 0.2);
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    CHECK(positives >= static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(n) - 1e-9)));
    CHECK(positives <= n);
    double min_pos = 1e18;
    double max_neg = -1e18;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i]) min_pos = std::min(min_pos, values[i]);
      else max_neg = std::max(max_neg, values[i]);
    }
    CHECK(min_pos > max_neg);
  }
}

TEST_CASE("per-group labels apply the rule inside each group") {
  const std::vector<double> v = {1, 2, 3, 4, 5, 10, 20, 30, 40, 50};
  const std::vector<std::string> g = {"a", "a", "a", "a", "a", "b", "b", "b", "b", "b"};
  const auto l = label_top_quantile_by_group(v, g, 0.2);
  CHECK(l == std::vector<bool>{false, false, false, false, true, false, false, false, false, true});
}

TEST_CASE("group stats") {
  const std::vector<FlaggedRow> rows = {{false, false, {10.0}}, {false, false, {20.0}}, {true, true, {30.0}}};
  const auto t = group_stats({"score"}, rows);
  CHECK(t.rows[0].cells[0].mean == 15.0);
  CHECK(t.rows[0].cells[0].stddev == 5.0);
  CHECK(t.rows[3].cells[0].mean == 30.0);
  CHECK(t.rows[3].cells[0].stddev == 0.0);
  CHECK_FALSE(t.rows[1].cells[0].mean);
  CHECK_FALSE(t.rows[2].cells[0].mean);
  CHECK(t.rows[1].rows == 0);
  CHECK(t.rows[1].misinfo == false);
  CHECK(t.rows[1].genai == true);
  CHECK(t.rows[2].misinfo == true);

  const auto single = group_stats({"x"}, std::vector<FlaggedRow>{{true, false, {4.5}}});
  CHECK(single.rows[2].cells[0].mean == 4.5);
  CHECK(single.rows[2].cells[0].stddev == 0.0);
}

TEST_CASE("group means recompose the global mean") {
  Rng rng(30);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<FlaggedRow> rows;
    const std::size_t n = 1 + uniform_index(rng, 80);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = standard_normal(rng) * 100.0;
      sum += x;
      rows.push_back({bernoulli(rng, 0.5), bernoulli(rng, 0.3), {x}});
    }
    const auto t = group_stats({"x"}, rows);
    double recomposed = 0.0;
    for (const auto& r : t.rows) {
      if (r.cells[0].mean) recomposed += *r.cells[0].mean * static_cast<double>(r.cells[0].count);
    }
    CHECK(recomposed / static_cast<double>(n) == doctest::Approx(sum / static_cast<double>(n)).epsilon(1e-9));
  }
}

TEST_CASE("post metrics use the reference timestamp") {
  auto a = make_post("a", 0);
  a.score = 100;
  a.total_comments = 50;
  auto b = make_post("b", 9 * 3600);
  const auto rows = post_metrics(std::vector{a, b}, 9 * 3600);
  CHECK(rows[0].age_hours == 9.0);
  CHECK(rows[0].vai == 15.0);
  CHECK(rows[1].age_hours == 0.0);
  CHECK(rows[0].engagement_ratio == 0.5);
  CHECK_THROWS_AS(post_metrics(std::vector{a, b}, 100), std::invalid_argument);
}

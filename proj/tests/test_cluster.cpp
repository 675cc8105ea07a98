#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include <fmt/format.h>

#include "cascade/cluster.h"
#include "cascade/disjoint_set.h"
#include "cascade/image.h"
#include "cascade/ingest.h"
#include "test_support.h"

using namespace cascade;
using cascade::testing::make_post;
namespace fs = std::filesystem;

namespace {

std::size_t brute_components(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> seen(n, false);
  std::size_t count = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++count;
    std::vector<std::size_t> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
  }
  return count;
}

std::vector<PostRecord> random_dataset(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<PostRecord> posts;
  for (std::size_t i = 0; i < n; ++i) {
    auto p = make_post(fmt::format("p{:03}", i), 1000 + static_cast<std::int64_t>(uniform_index(rng, 50)));
    const auto author = uniform_index(rng, 8);
    p.author = author == 0 ? std::string(kDeletedAuthor) : fmt::format("u{}", author);
    p.title = fmt::format("title {}", uniform_index(rng, 6));
    if (bernoulli(rng, 0.6)) p.image_url = fmt::format("https://x.com/{}.jpg", uniform_index(rng, 2 * n));
    if (bernoulli(rng, 0.2)) p.crosspost_parent_id = fmt::format("p{:03}", uniform_index(rng, n + 5));
    if (p.crosspost_parent_id == p.id) p.crosspost_parent_id.reset();
    posts.push_back(std::move(p));
  }
  return validate_and_dedupe(std::move(posts));
}

std::set<std::set<std::string>> as_sets(const CascadeSet& set) {
  std::set<std::set<std::string>> out;
  for (const auto& c : set.cascades) out.emplace(c.begin(), c.end());
  return out;
}

}  // namespace

TEST_CASE("disjoint set basics") {
  DisjointSet dsu(10);
  CHECK(dsu.find(3) == 3);
  CHECK(dsu.count_sets() == 10);
  CHECK(dsu.unite(1, 2));
  CHECK(dsu.unite(2, 3));
  CHECK_FALSE(dsu.unite(1, 3));
  CHECK(dsu.find(1) == dsu.find(3));
  CHECK(dsu.find(dsu.find(1)) == dsu.find(1));
  CHECK(dsu.count_sets() == 8);
  CHECK_THROWS_AS(dsu.find(10), std::out_of_range);
  CHECK_THROWS_AS(dsu.unite(0, 11), std::out_of_range);
}

TEST_CASE("disjoint set matches brute-force components") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 40);
    DisjointSet dsu(n);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    const auto m = uniform_index(rng, 2 * n);
    for (std::size_t k = 0; k < m; ++k) {
      const auto a = uniform_index(rng, n);
      const auto b = uniform_index(rng, n);
      edges.emplace_back(a, b);
      dsu.unite(a, b);
      CHECK(dsu.find(a) == dsu.find(b));
    }
    std::set<std::size_t> reps;
    for (std::size_t i = 0; i < n; ++i) reps.insert(dsu.find(i));
    CHECK(reps.size() == brute_components(n, edges));
    CHECK(dsu.count_sets() == reps.size());
  }
}

TEST_CASE("identical image urls merge across authors and subreddits") {
  auto a = make_post("A", 10, "s1");
  a.author = "ann";
  a.image_url = "https://i.example.com/1.jpg";
  auto b = make_post("B", 20, "s2");
  b.author = "bob";
  b.image_url = "https://i.example.com/1.jpg";
  const auto set = build_cascades(std::vector{a, b}, {});
  REQUIRE(set.cascades.size() == 1);
  CHECK(set.cascades[0] == std::vector<std::string>{"A", "B"});
  REQUIRE(set.merge_log.size() == 1);
  CHECK(set.merge_log[0].rule == MergeRule::kUrl);
}

TEST_CASE("unrelated posts stay singletons") {
  std::vector<PostRecord> posts;
  for (int i = 0; i < 3; ++i) {
    auto p = make_post(fmt::format("P{}", i), 10 + i);
    p.author = fmt::format("user{}", i);
    p.image_url = fmt::format("https://x.com/{}.jpg", i);
    posts.push_back(p);
  }
  const auto set = build_cascades(posts, {});
  CHECK(set.cascades.size() == 3);
  CHECK(set.merge_log.empty());
}

TEST_CASE("three rules chain together") {
  auto a = make_post("A", 10);
  a.author = "ann";
  a.image_url = "https://x.com/u1.jpg";
  auto b = make_post("B", 20);
  b.author = "bob";
  b.crosspost_parent_id = "A";
  b.title = "Cat Photo";
  auto c = make_post("C", 30);
  c.author = "bob";
  c.title = "cat photo";
  auto d = make_post("D", 40);
  d.author = "dan";
  d.title = "cat photo";
  const auto set = build_cascades(std::vector{a, b, c, d}, {});
  REQUIRE(set.cascades.size() == 2);
  CHECK(set.cascades[0] == std::vector<std::string>{"A", "B", "C"});
  CHECK(set.cascades[1] == std::vector<std::string>{"D"});
  CHECK(set.report.crosspost_merges == 1);
  CHECK(set.report.same_author_merges == 1);

  SimilarityConfig no_titles;
  no_titles.enable_title_fallback = false;
  CHECK(build_cascades(std::vector{a, b, c, d}, no_titles).cascades.size() == 3);
}

TEST_CASE("deleted authors never trigger the same-author rule") {
  auto a = make_post("A", 10);
  a.author = "[deleted]";
  a.title = "same";
  auto b = make_post("B", 20);
  b.author = "[deleted]";
  b.title = "same";
  auto c = make_post("C", 30);
  c.title = "same";
  auto d = make_post("D", 40);
  d.title = "same";
  CHECK(build_cascades(std::vector{a, b, c, d}, {}).cascades.size() == 4);
}

TEST_CASE("same-author image content key uses the url") {
  auto a = make_post("A", 10);
  a.author = "ann";
  a.image_url = "https://x.com/1.jpg";
  auto b = make_post("B", 20);
  b.author = "ann";
  b.image_url = "https://x.com/2.jpg";
  b.title = a.title;
  CHECK(build_cascades(std::vector{a, b}, {}).cascades.size() == 2);
}

TEST_CASE("dangling and self parents are counted, not merged") {
  auto a = make_post("A", 10);
  a.crosspost_parent_id = "missing";
  auto b = make_post("B", 20);
  b.crosspost_parent_id = "also-missing";
  const auto set = build_cascades(std::vector{a, b}, {});
  CHECK(set.cascades.size() == 2);
  CHECK(set.report.dangling_parents == 2);
  CHECK(set.post_count() == 2);
}

TEST_CASE("thumbnail hashes within the threshold merge") {
  const fs::path dir = fs::temp_directory_path() / "cascade_cluster_thumbs";
  fs::create_directories(dir);
  Image base(32, 32, 3);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      for (int c = 0; c < 3; ++c) base.at(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * 3 + c * 40) % 256);
    }
  }
  Image near = base;
  near.at(5, 5, 0) = static_cast<std::uint8_t>(near.at(5, 5, 0) ^ 1);
  Image far(32, 32, 3);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      for (int c = 0; c < 3; ++c) far.at(x, y, c) = static_cast<std::uint8_t>(((31 - x) * 8 + (y % 4) * 50) % 256);
    }
  }
  save_image(base, dir / "a.png");
  save_image(near, dir / "b.png");
  save_image(far, dir / "c.png");
  REQUIRE(hamming_distance(difference_hash(to_luma(base)), difference_hash(to_luma(far))) > 4);

  std::vector<PostRecord> posts;
  for (const char* name : {"a", "b", "c"}) {
    auto p = make_post(name, 10 + static_cast<std::int64_t>(posts.size()));
    p.author = "ann";
    p.thumbnail_path = std::string(name) + ".png";
    p.title = std::string("t") + name;
    posts.push_back(p);
  }
  auto missing = make_post("d", 20);
  missing.author = "ann";
  missing.thumbnail_path = "nope.png";
  missing.title = "ta";
  posts.push_back(missing);

  SimilarityConfig config;
  config.thumbnail_root = dir;
  config.threads = 2;
  const auto set = build_cascades(posts, config);
  CHECK(set.report.unreadable_thumbnails == 1);
  // "d" falls back to its title, but "a" is keyed by its hash, so they stay apart.
  std::set<std::set<std::string>> expected = {{"a", "b"}, {"c"}, {"d"}};
  CHECK(as_sets(set) == expected);
  fs::remove_all(dir);
}

TEST_CASE("partition property and order independence") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto posts = random_dataset(seed, 40);
    const auto set = build_cascades(posts, {});
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& c : set.cascades) {
      total += c.size();
      seen.insert(c.begin(), c.end());
    }
    CHECK(total == posts.size());
    CHECK(seen.size() == posts.size());

    Rng rng(seed + 77);
    shuffle(posts, rng);
    const auto again = build_cascades(posts, {});
    CHECK(again.cascades == set.cascades);
  }
}

TEST_CASE("adding a crosspost edge never increases the cascade count") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto posts = random_dataset(seed, 30);
    const auto before = build_cascades(posts, {}).cascades.size();
    Rng rng(seed);
    const auto i = uniform_index(rng, posts.size());
    const auto j = uniform_index(rng, posts.size());
    if (i == j || posts[i].crosspost_parent_id) continue;
    posts[i].crosspost_parent_id = posts[j].id;
    CHECK(build_cascades(posts, {}).cascades.size() <= before);
  }
}

TEST_CASE("assignment and merge log writers") {
  auto a = make_post("A", 10);
  a.image_url = "u";
  auto b = make_post("B", 20);
  b.image_url = "u";
  const auto set = build_cascades(std::vector{a, b, make_post("C", 30)}, {});
  std::ostringstream as;
  write_assignments(as, set);
  CHECK(as.str() == "post_id,cascade_id\nA,0\nB,0\nC,1\n");
  std::ostringstream ml;
  write_merge_log(ml, set);
  CHECK(ml.str() == "post_a,post_b,rule\nA,B,url\n");
}

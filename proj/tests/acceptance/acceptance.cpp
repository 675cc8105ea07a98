// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <fcntl.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "cascade/cluster.h"
#include "cascade/image.h"
#include "cascade/ingest.h"
#include "cascade/metrics.h"
#include "cascade/predict.h"
#include "cascade/random.h"
#include "cascade/repost_graph.h"
#include "cascade/synth.h"

using namespace cascade;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RepostGraph random_tree(std::size_t n, Rng& rng) {
  RepostGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back(fmt::format("n{}", i));
    g.parent.push_back(i == 0 ? kNoParent : static_cast<std::size_t>(uniform_index(rng, i)));
  }
  return g;
}

RepostGraph shaped(std::size_t n, bool star) {
  RepostGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back(fmt::format("n{}", i));
    g.parent.push_back(i == 0 ? kNoParent : (star ? 0 : i - 1));
  }
  return g;
}

std::vector<std::size_t> labels_by_record(const std::vector<PostRecord>& records, const CascadeSet& set) {
  std::map<std::string, std::size_t> of;
  for (std::size_t c = 0; c < set.cascades.size(); ++c) {
    for (const auto& id : set.cascades[c]) of[id] = c;
  }
  std::vector<std::size_t> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(of.at(r.id));
  return out;
}

struct ChildRun {
  int status = -1;
  double seconds = 0.0;
  double peak_rss_mb = 0.0;
};

ChildRun run_cli(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  std::string exe = CASCADE_CLI_PATH;
  argv.push_back(exe.data());
  std::vector<std::string> owned = args;
  for (auto& a : owned) argv.push_back(a.data());
  argv.push_back(nullptr);

  ChildRun out;
  const auto t0 = std::chrono::steady_clock::now();
  const pid_t pid = fork();
  if (pid == 0) {
    const int null_fd = open("/dev/null", O_WRONLY);
    dup2(null_fd, STDOUT_FILENO);
    execv(exe.c_str(), argv.data());
    _exit(127);
  }
  int status = 0;
  rusage usage{};
  wait4(pid, &status, 0, &usage);
  out.seconds = seconds_since(t0);
  out.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  out.peak_rss_mb = static_cast<double>(usage.ru_maxrss) / 1024.0;
  return out;
}

fs::path scratch(std::string_view name) {
  const fs::path dir = fs::temp_directory_path() / fmt::format("cascade_acceptance_{}", name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---- criteria ------------------------------------------------------------------

Outcome wiener_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto g = random_tree(2 + uniform_index(rng, 199), rng);
    const double expected = oracle_wiener(g.size(), g.edges());
    const double got = structural_virality(g);
    worst = std::max(worst, std::fabs(got - expected) / expected);
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 10.0, fmt::format("500 trees, max rel err {:.3g}, {:.2f} s", worst, secs)};
}

Outcome closed_forms() {
  bool ok = true;
  for (std::uint64_t n = 2; n <= 100; ++n) ok = ok && wiener_index(shaped(n, false)) == (n + 1) * n * (n - 1) / 6;
  for (std::uint64_t n = 3; n <= 100; ++n) {
    // Leaves sit at distance 1 from the root and 2 from each other.
    ok = ok && wiener_index(shaped(n, true)) == (n - 1) + (n - 1) * (n - 2);
  }
  ok = ok && structural_virality(shaped(1, false)) == 0.0 && structural_virality(shaped(2, false)) == 1.0;
  return {ok, "chains 2..100, stars 3..100, singleton, pair"};
}

Outcome clustering_recovery() {
  std::size_t exact = 0;
  std::size_t invariant = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    SynthConfig c;
    c.seed = derive_seed(seed, "recovery");
    c.num_cascades = 40;
    c.shape = TreeShape::kMixed;
    auto data = generate(c);
    const auto set = build_cascades(data.records, {});
    if (adjusted_rand_index(data.truth.cascade_of, labels_by_record(data.records, set)) == 1.0) ++exact;
    Rng rng(seed);
    auto shuffled = data.records;
    shuffle(shuffled, rng);
    if (build_cascades(shuffled, {}).cascades == set.cascades) ++invariant;
  }
  return {exact == 1000 && invariant == 1000,
          fmt::format("ARI = 1 on {}/1000, permutation-invariant on {}/1000", exact, invariant)};
}

Outcome depth_relation() {
  std::size_t cascades = 0;
  std::size_t holds = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SynthConfig c;
    c.seed = derive_seed(seed, "depth");
    c.num_cascades = 100;
    c.crosspost_evidence_fraction = 0.0;
    const auto data = generate(c);
    auto records = validate_and_dedupe(data.records);
    const auto set = build_cascades(records, {});
    std::map<std::string, const PostRecord*> by_id;
    for (const auto& r : records) by_id[r.id] = &r;
    for (const auto& members : set.cascades) {
      std::vector<const PostRecord*> posts;
      for (const auto& id : members) posts.push_back(by_id.at(id));
      const auto g = build_repost_graph(std::span<const PostRecord* const>(posts));
      ++cascades;
      if (depth(g) == g.size() - 1) ++holds;
    }
  }
  return {cascades > 0 && holds == cascades, fmt::format("depth = size - 1 on {}/{} cascades", holds, cascades)};
}

Outcome formula_fixtures() {
  bool ok = vai(100, 50, 9.0) == 15.0 && vai(0, 0, 37.5) == 0.0 && vai(10, 5, 0.0) == 15.0;
  ok = ok && engagement_ratio(10, 0) == 10.0 && engagement_ratio(0, 500) == 0.0 &&
       engagement_ratio(250, 1000) == 0.25;
  Rng rng(5);
  std::size_t violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto s = static_cast<std::int64_t>(uniform_index(rng, 1'000'000));
    const auto c = static_cast<std::int64_t>(uniform_index(rng, 100'000));
    const double age = uniform01(rng) * 5000.0;
    const double base = vai(s, c, age);
    if (s + c > 0 && !(vai(s, c, age + 1.0) < base)) ++violations;
    if (!(vai(s + 1, c, age) > base) || !(vai(s, c + 1, age) > base)) ++violations;
  }
  return {ok && violations == 0, fmt::format("6 fixtures {}, {} monotonicity violations in 10000 triples",
                                             ok ? "exact" : "WRONG", violations)};
}

Outcome auc_exactness() {
  Rng rng(6);
  std::size_t equal = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 999);
    std::vector<double> s(n);
    std::vector<bool> l(n);
    const bool coarse = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? static_cast<double>(uniform_index(rng, 10)) : standard_normal(rng);
      l[i] = bernoulli(rng, 0.3);
    }
    l[0] = true;
    l[1] = false;
    double good = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!l[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (l[j]) continue;
        pairs += 1.0;
        good += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
    if (roc_auc(s, l) == good / pairs) ++equal;
  }
  return {equal == 200, fmt::format("{}/200 sets equal brute force exactly", equal)};
}

Outcome shapley_axioms() {
  Rng rng(7);
  double worst_efficiency = 0.0;
  double worst_closed = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    std::vector<double> w(n), x(n), mu(n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = standard_normal(rng) * 3.0;
      x[i] = standard_normal(rng) * 10.0;
      mu[i] = standard_normal(rng);
    }
    const double b = standard_normal(rng);
    ScoreFunction f = [&](std::span<const double> z) {
      double s = b;
      for (std::size_t i = 0; i < n; ++i) s += w[i] * z[i];
      return s;
    };
    const auto phi = exact_shapley(f, x, mu);
    const double total = std::accumulate(phi.begin(), phi.end(), 0.0);
    worst_efficiency = std::max(worst_efficiency, std::fabs(total - (f(x) - f(mu))));
    for (std::size_t i = 0; i < n; ++i) {
      worst_closed = std::max(worst_closed, std::fabs(phi[i] - w[i] * (x[i] - mu[i])));
    }
  }

  // Duplicated column in a trained model.
  FeatureMatrix m({"a", "a_copy", "b"});
  for (int i = 0; i < 300; ++i) {
    const double a = standard_normal(rng);
    const double b = standard_normal(rng);
    const std::vector<double> row = {a, a, b};
    m.append_row(fmt::format("r{}", i), row, a + 0.5 * b + 0.3 * standard_normal(rng) > 0);
  }
  const auto model = train_logistic(m, m.labels());
  const auto bg = column_means(m);
  double worst_symmetry = 0.0;
  for (std::size_t r = 0; r < 50; ++r) {
    const auto phi = exact_shapley(model, m.row(r), bg);
    worst_symmetry = std::max(worst_symmetry, std::fabs(phi[0] - phi[1]));
  }
  const bool ok = worst_efficiency <= 1e-9 && worst_closed <= 1e-9 && worst_symmetry <= 1e-9;
  return {ok, fmt::format("efficiency err {:.2g}, closed-form err {:.2g}, symmetry err {:.2g}", worst_efficiency,
                          worst_closed, worst_symmetry)};
}

Outcome image_fixtures() {
  constexpr double kElaEpsilon = 2.0;
  Image flat(16, 12, 3);
  std::fill(flat.pixels.begin(), flat.pixels.end(), std::uint8_t{128});
  Image ramp(16, 12, 1);
  Image board(4, 4, 1);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 16; ++x) ramp.at(x, y) = static_cast<std::uint8_t>(10 * x + 3);
  }
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) board.at(x, y) = (x + y) % 2 ? 255 : 0;
  }
  Rng rng(8);
  Image photo(64, 48, 3);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = 100.0 + 60.0 * std::sin(x * 0.3 + c) + 40.0 * std::cos(y * 0.21) + 5.0 * standard_normal(rng);
        photo.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  const Image saved = decode_image(encode_jpeg(photo, 90));
  const double ela = ela_score(saved, 90);
  const bool ok = laplacian_variance(to_luma(flat)) == 0.0 && noise_score(to_luma(flat)) == 0.0 &&
                  laplacian_variance(to_luma(ramp)) == 0.0 && noise_score(to_luma(board)) == 255.0 &&
                  ela <= kElaEpsilon;
  return {ok, fmt::format("flat, ramp and checkerboard fixtures; self re-encode ELA {:.3f} (epsilon {})", ela,
                          kElaEpsilon)};
}

Outcome planted_signal() {
  std::size_t ordered = 0;
  std::string sample;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = planted_signal_matrices(derive_seed(seed, "planted"), 2000);
    const std::vector<ExperimentCell> cells = {
        {"cascade", "content", &p.content}, {"cascade", "context", &p.context}, {"cascade", "combined", &p.combined}};
    GridOptions opts;
    opts.seed = seed;
    const auto rows = run_experiment_grid(cells, opts);
    if (rows[2].auc >= rows[1].auc && rows[1].auc >= rows[0].auc) ++ordered;
    if (seed == 0) sample = fmt::format("{:.3f} < {:.3f} < {:.3f}", rows[0].auc, rows[1].auc, rows[2].auc);
  }
  return {ordered == 20, fmt::format("content <= context <= combined on {}/20 datasets (e.g. {})", ordered, sample)};
}

Outcome throughput() {
  constexpr std::size_t kPosts = 1'000'000;
  const fs::path dir = scratch("throughput");
  {
    SynthConfig c;
    c.seed = 2024;
    c.num_cascades = 420'000;
    auto data = generate(c);
    if (data.records.size() < kPosts) return {false, "generator produced too few posts"};
    data.records.resize(kPosts);
    std::ofstream out(dir / "posts.jsonl", std::ios::binary);
    write_json_lines(out, data.records);
  }
  const auto run = run_cli({"--output-dir", (dir / "out").string(), "run", "--input", (dir / "posts.jsonl").string(),
                            "--stages", "ingest,cluster,graph,metrics"});
  fs::remove_all(dir);
  const bool ok = run.status == 0 && run.seconds <= 60.0 && run.peak_rss_mb <= 4096.0;
  return {ok, fmt::format("1,000,000 posts ingest..metrics in {:.1f} s, peak RSS {:.0f} MB, exit {}", run.seconds,
                          run.peak_rss_mb, run.status)};
}

Outcome determinism() {
  const fs::path dir = scratch("determinism");
  const auto data = (dir / "synth.jsonl").string();
  const auto gen = run_cli({"--seed", "9", "synth", "--output", data, "--num-cascades", "300"});
  const auto a = run_cli({"--seed", "9", "--output-dir", (dir / "a").string(), "run", "--input", data});
  const auto b = run_cli({"--seed", "9", "--output-dir", (dir / "b").string(), "run", "--input", data});
  bool ok = gen.status == 0 && a.status == 0 && b.status == 0;
  std::string detail = fmt::format("exit codes {}/{}/{}", gen.status, a.status, b.status);
  if (ok) {
    const std::string ma = read_file(dir / "a" / "manifest.json");
    const std::string mb = read_file(dir / "b" / "manifest.json");
    const auto artifacts = nlohmann::json::parse(ma)["artifacts"].size();
    ok = ma == mb && artifacts >= 15;
    detail = fmt::format("{} artifacts, manifests {}", artifacts, ma == mb ? "identical" : "DIFFER");
  }
  fs::remove_all(dir);
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"wiener oracle equivalence", wiener_oracle},
      {"closed-form distance sums", closed_forms},
      {"planted partition recovery", clustering_recovery},
      {"depth equals size minus one", depth_relation},
      {"vai and engagement-ratio fixtures", formula_fixtures},
      {"auc exactness", auc_exactness},
      {"shapley axioms", shapley_axioms},
      {"image feature fixtures", image_fixtures},
      {"planted-signal mode ordering", planted_signal},
      {"million-post throughput", throughput},
      {"artifact determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

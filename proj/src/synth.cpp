#include "cascade/synth.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "cascade/ingest.h"
#include "cascade/random.h"

namespace cascade {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::string mutate_url(const std::string& url, Rng& rng) {
  switch (uniform_index(rng, 4)) {
    case 0: {
      std::string out = url;
      const auto host = out.find("://");
      for (std::size_t i = host + 3; i < out.size() && out[i] != '/'; ++i) {
        out[i] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[i])));
      }
      return out;
    }
    case 1: return url + "?utm_source=share";
    case 2: return url + "/";
    default: return url + "#view";
  }
}

TreeShape pick_shape(TreeShape configured, Rng& rng) {
  if (configured != TreeShape::kMixed) return configured;
  return static_cast<TreeShape>(uniform_index(rng, 3));
}

}  // namespace

std::string_view to_string(TreeShape shape) {
  switch (shape) {
    case TreeShape::kChain: return "chain";
    case TreeShape::kStar: return "star";
    case TreeShape::kRandomTree: return "random-tree";
    case TreeShape::kMixed: return "mixed";
  }
  return "unknown";
}

TreeShape tree_shape_from_name(std::string_view name) {
  if (name == "chain") return TreeShape::kChain;
  if (name == "star") return TreeShape::kStar;
  if (name == "random-tree" || name == "random_tree" || name == "tree") return TreeShape::kRandomTree;
  if (name == "mixed") return TreeShape::kMixed;
  throw std::invalid_argument(fmt::format("unknown tree shape '{}'", name));
}

void validate(const SynthConfig& c) {
  if (!is_probability(c.crosspost_evidence_fraction) || !is_probability(c.misinfo_prob) ||
      !is_probability(c.genai_prob) || !is_probability(c.degrade_fraction)) {
    throw std::invalid_argument("synth: probabilities must lie in [0, 1]");
  }
  if (c.fixed_size == 0 && !(c.size_p > 0.0 && c.size_p <= 1.0)) {
    throw std::invalid_argument("synth: size_p must lie in (0, 1]");
  }
  if (!(c.mean_gap_hours > 0.0)) throw std::invalid_argument("synth: mean_gap_hours must be positive");
  if (c.subreddit_pool == 0) throw std::invalid_argument("synth: subreddit_pool must be positive");
  if (c.max_size == 0) throw std::invalid_argument("synth: max_size must be positive");
  if (c.score_mean < 0.0 || c.comments_mean < 0.0 || c.start_spread_hours < 0.0) {
    throw std::invalid_argument("synth: engagement means and spread must be non-negative");
  }
  if (c.start_utc <= 0) throw std::invalid_argument("synth: start_utc must be positive");
}

SynthDataset generate(const SynthConfig& config) {
  validate(config);
  Rng rng(config.seed);
  SynthDataset data;
  const std::size_t author_pool = std::max<std::size_t>(10, 3 * config.num_cascades);
  static const char* kWords[] = {"flag", "rally", "senate", "photo", "leak", "storm",
                                 "border", "vote", "poster", "mask", "debate", "crowd"};
  static const char* kClickbait[] = {"BREAKING", "viral", "Shocking"};

  for (std::size_t c = 0; c < config.num_cascades; ++c) {
    const std::size_t size =
        config.fixed_size > 0
            ? config.fixed_size
            : std::min<std::size_t>(geometric(rng, config.size_p), config.max_size);
    const TreeShape shape = pick_shape(config.shape, rng);
    const bool misinfo = bernoulli(rng, config.misinfo_prob);
    const bool genai = bernoulli(rng, config.genai_prob);
    const double multiplier = (misinfo ? config.misinfo_engagement : 1.0) *
                              (genai ? config.genai_engagement : 1.0);
    const std::string cascade_url = fmt::format("https://img.example.com/c{:07}.jpg", c);
    const std::string topic = fmt::format("{} {} {}", kWords[uniform_index(rng, 12)],
                                          kWords[uniform_index(rng, 12)], c);

    auto t = config.start_utc +
             static_cast<std::int64_t>(uniform01(rng) * config.start_spread_hours * 3600.0);
    std::vector<std::string> ids(size);
    std::vector<std::int64_t> crosspost_children(size, 0);
    const std::size_t first = data.records.size();
    for (std::size_t k = 0; k < size; ++k) {
      ids[k] = fmt::format("c{:07}p{:05}", c, k);
      std::optional<std::size_t> parent;
      if (k > 0) {
        switch (shape) {
          case TreeShape::kChain: parent = k - 1; break;
          case TreeShape::kStar: parent = 0; break;
          default: parent = uniform_index(rng, k); break;
        }
        t += std::max<std::int64_t>(1, std::llround(exponential(rng, config.mean_gap_hours) * 3600.0));
      }

      PostRecord r;
      r.id = ids[k];
      r.created_utc = t;
      r.subreddit = fmt::format("sub_{}", uniform_index(rng, config.subreddit_pool));
      r.author = fmt::format("user_{}", uniform_index(rng, author_pool));
      r.title = bernoulli(rng, 0.2)
                    ? fmt::format("{}: {}", kClickbait[uniform_index(rng, 3)], topic)
                    : topic;
      r.image_url = cascade_url;
      if (parent) {
        if (bernoulli(rng, config.crosspost_evidence_fraction)) {
          r.crosspost_parent_id = ids[*parent];
          r.image_url = fmt::format("https://img.example.com/c{:07}/p{:05}.jpg", c, k);
          ++crosspost_children[*parent];
        } else if (config.degrade && bernoulli(rng, config.degrade_fraction)) {
          if (bernoulli(rng, 0.5)) {
            r.crosspost_parent_id = fmt::format("ghost_{:07}_{:05}", c, k);
          } else {
            r.image_url = mutate_url(cascade_url, rng);
          }
        }
      }
      r.score = std::llround(exponential(rng, config.score_mean * multiplier));
      r.total_comments = std::llround(exponential(rng, config.comments_mean * multiplier));
      r.upvote_ratio = std::round((0.5 + 0.5 * uniform01(rng)) * 1000.0) / 1000.0;
      r.is_original_content = bernoulli(rng, 0.1);
      r.misinfo_flag = misinfo;
      r.genai_flag = genai;
      const double pos = std::round(uniform01(rng) * 500.0) / 1000.0;
      const double neg = std::round(uniform01(rng) * 500.0) / 1000.0;
      r.sentiment_pos = pos;
      r.sentiment_neg = neg;
      r.sentiment_compound = pos - neg;
      data.records.push_back(std::move(r));
      data.truth.cascade_of.push_back(c);
      data.truth.planted_parent.push_back(parent ? std::optional<std::string>(ids[*parent]) : std::nullopt);
    }
    for (std::size_t k = 0; k < size; ++k) data.records[first + k].num_crossposts = crosspost_children[k];
  }

  // Interleave cascades so record order carries no structure.
  std::vector<std::size_t> order(data.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng);
  SynthDataset shuffled;
  shuffled.records.reserve(order.size());
  for (std::size_t i : order) {
    shuffled.records.push_back(std::move(data.records[i]));
    shuffled.truth.cascade_of.push_back(data.truth.cascade_of[i]);
    shuffled.truth.planted_parent.push_back(std::move(data.truth.planted_parent[i]));
  }
  return shuffled;
}

void write_truth(std::ostream& out, const SynthDataset& data) {
  out << "post_id,cascade_id,parent_id\n";
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    out << quote_field(data.records[i].id) << ',' << data.truth.cascade_of[i] << ','
        << quote_field(data.truth.planted_parent[i].value_or("")) << '\n';
  }
}

double oracle_wiener(std::size_t nodes, std::span<const std::pair<std::size_t, std::size_t>> edges) {
  if (nodes == 0) throw std::invalid_argument("oracle_wiener: empty graph");
  std::vector<std::vector<std::size_t>> adj(nodes);
  for (const auto& [a, b] : edges) {
    if (a >= nodes || b >= nodes) throw std::invalid_argument("oracle_wiener: edge out of range");
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  if (nodes == 1) return 0.0;
  std::uint64_t total = 0;
  std::vector<std::int64_t> dist(nodes);
  for (std::size_t s = 0; s < nodes; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::deque<std::size_t> queue{s};
    dist[s] = 0;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t v : adj[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
      }
    }
    for (std::size_t v = s + 1; v < nodes; ++v) {
      if (dist[v] < 0) throw std::invalid_argument("oracle_wiener: graph is disconnected");
      total += static_cast<std::uint64_t>(dist[v]);
    }
  }
  const double pairs = static_cast<double>(nodes) * static_cast<double>(nodes - 1) / 2.0;
  return static_cast<double>(total) / pairs;
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: size mismatch");
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> joint;
  std::map<std::size_t, std::size_t> ca;
  std::map<std::size_t, std::size_t> cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++ca[a[i]];
    ++cb[b[i]];
  }
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [_, n] : joint) index += choose2(static_cast<double>(n));
  for (const auto& [_, n] : ca) sum_a += choose2(static_cast<double>(n));
  for (const auto& [_, n] : cb) sum_b += choose2(static_cast<double>(n));
  const double total = choose2(static_cast<double>(a.size()));
  const double expected = total > 0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) {
    // Degenerate: both partitions all-singletons or one block.
    return joint.size() == ca.size() && joint.size() == cb.size() ? 1.0 : 0.0;
  }
  return (index - expected) / (max_index - expected);
}

PlantedSignalMatrices planted_signal_matrices(std::uint64_t seed, std::size_t rows) {
  const std::vector<std::string> content_cols = {"mean_noise_score", "mean_laplacian_variance",
                                                 "mean_sentiment_compound", "misinfo_count"};
  const std::vector<std::string> context_cols = {"time_to_first_repost_hr", "lifespan_hr",
                                                 "num_subreddits", "max_branch"};
  std::vector<std::string> combined_cols = content_cols;
  combined_cols.insert(combined_cols.end(), context_cols.begin(), context_cols.end());

  PlantedSignalMatrices out{FeatureMatrix(content_cols), FeatureMatrix(context_cols),
                            FeatureMatrix(combined_cols)};
  Rng rng(seed);
  std::vector<double> content(content_cols.size());
  std::vector<double> context(context_cols.size());
  for (std::size_t i = 0; i < rows; ++i) {
    for (double& v : content) v = standard_normal(rng);
    for (double& v : context) v = standard_normal(rng);
    const double logit = 3.0 * context[0] + 2.0 * context[1] + 1.5 * content[0] + 1.0 * content[3] - 1.5;
    const bool label = bernoulli(rng, 1.0 / (1.0 + std::exp(-logit)));
    std::vector<double> both = content;
    both.insert(both.end(), context.begin(), context.end());
    const std::string id = fmt::format("cascade_{}", i);
    out.content.append_row(id, content, label);
    out.context.append_row(id, context, label);
    out.combined.append_row(id, both, label);
  }
  return out;
}

}  // namespace cascade

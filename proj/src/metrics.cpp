#include "cascade/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

namespace cascade {

double vai(std::int64_t score, std::int64_t total_comments, double age_hours,
           const VaiParams& params) {
  if (score < 0 || total_comments < 0) {
    throw std::invalid_argument("vai: score and comments must be non-negative");
  }
  if (!(age_hours >= 0.0)) throw std::invalid_argument("vai: age_hours must be non-negative");
  if (!(params.tau > 0.0)) throw std::invalid_argument("vai: tau must be positive");
  const double numerator =
      static_cast<double>(score) + params.alpha * static_cast<double>(total_comments);
  return numerator / std::pow(age_hours + params.tau, params.beta);
}

double engagement_ratio(std::int64_t total_comments, std::int64_t score) {
  return static_cast<double>(total_comments) / static_cast<double>(std::max<std::int64_t>(score, 1));
}

std::uint64_t wiener_index(const RepostGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<std::uint64_t> subtree(n, 1);
  std::uint64_t total = 0;
  // Children always follow their parent, so a reverse sweep sees every
  // subtree complete before its parent edge.
  for (std::size_t i = n; i-- > 1;) {
    total += subtree[i] * (n - subtree[i]);
    subtree[graph.parent[i]] += subtree[i];
  }
  return total;
}

double structural_virality(const RepostGraph& graph) {
  const std::size_t n = graph.size();
  if (n < 2) return 0.0;
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(wiener_index(graph)) / pairs;
}

TemporalMetrics temporal_metrics(std::span<const std::int64_t> t, double window_hr) {
  if (t.empty()) throw std::invalid_argument("temporal_metrics: empty cascade");
  if (!(window_hr > 0.0)) throw std::invalid_argument("temporal_metrics: window must be positive");
  if (!std::is_sorted(t.begin(), t.end())) {
    throw std::invalid_argument("temporal_metrics: timestamps not sorted");
  }
  TemporalMetrics m;
  m.lifespan_hr = seconds_to_hours(t.back() - t.front());
  if (t.size() < 2) return m;

  m.time_to_first_repost_hr = seconds_to_hours(t[1] - t[0]);
  m.avg_repost_delay_hr = m.lifespan_hr / static_cast<double>(t.size() - 1);

  const double window_s = window_hr * 3600.0;
  std::size_t best_i = 1;
  std::size_t best_j = 1;
  std::size_t j = 1;
  for (std::size_t i = 1; i < t.size(); ++i) {
    j = std::max(j, i);
    while (j + 1 < t.size() && static_cast<double>(t[j + 1] - t[i]) <= window_s) ++j;
    if (j - i > best_j - best_i) {
      best_i = i;
      best_j = j;
    }
  }
  const double center_s = 0.5 * static_cast<double>((t[best_i] - t[0]) + (t[best_j] - t[0]));
  m.peak_repost_speed_hr = center_s / 3600.0;
  return m;
}

namespace {

template <typename Map>
double entropy_bits(const Map& counts, std::size_t total) {
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;  // normalize -0
}

}  // namespace

ContentEntropy content_entropy(std::span<const PostRecord* const> posts) {
  std::map<std::string, std::size_t> titles;
  std::map<std::string, std::size_t> images;
  for (const PostRecord* p : posts) {
    ++titles[case_fold(p->title)];
    // '\0' cannot occur in a URL, so it marks the pooled "no URL" category.
    ++images[p->image_url ? *p->image_url : std::string(1, '\0')];
  }
  ContentEntropy e;
  if (posts.empty()) return e;
  e.text_bits = entropy_bits(titles, posts.size());
  e.image_bits = entropy_bits(images, posts.size());
  return e;
}

CascadeMetrics cascade_summary(std::span<const PostRecord* const> posts, const RepostGraph& graph,
                               double window_hr, std::size_t cascade_id) {
  if (posts.empty()) throw std::invalid_argument("cascade_summary: empty cascade");
  if (posts.size() != graph.size()) {
    throw std::invalid_argument(fmt::format("cascade_summary: {} posts but graph has {} nodes",
                                            posts.size(), graph.size()));
  }
  std::vector<const PostRecord*> ordered(posts.begin(), posts.end());
  std::sort(ordered.begin(), ordered.end(),
            [](const PostRecord* a, const PostRecord* b) { return time_order_less(*a, *b); });
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (ordered[i]->id != graph.nodes[i]) {
      throw std::invalid_argument(
          fmt::format("cascade_summary: post '{}' does not match graph node '{}'", ordered[i]->id,
                      graph.nodes[i]));
    }
  }

  CascadeMetrics m;
  m.cascade_id = cascade_id;
  m.size = graph.size();
  m.depth = depth(graph);
  const Branching b = branching(graph);
  m.mean_branch = b.mean_out_degree;
  m.max_branch = static_cast<double>(b.max_out_degree);
  m.structural_virality = structural_virality(graph);

  std::vector<std::int64_t> times;
  times.reserve(ordered.size());
  std::unordered_set<std::string_view> subreddits;
  for (const PostRecord* p : ordered) {
    times.push_back(p->created_utc);
    subreddits.insert(p->subreddit);
    m.total_upvotes += p->score;
    m.misinfo_cascade_flag = m.misinfo_cascade_flag || p->misinfo_flag;
    m.genai_cascade_flag = m.genai_cascade_flag || p->genai_flag;
  }
  const TemporalMetrics tm = temporal_metrics(times, window_hr);
  m.time_to_first_repost_hr = tm.time_to_first_repost_hr;
  m.peak_repost_speed_hr = tm.peak_repost_speed_hr;
  m.lifespan_hr = tm.lifespan_hr;
  m.avg_repost_delay_hr = tm.avg_repost_delay_hr;
  m.num_subreddits = subreddits.size();
  const ContentEntropy e = content_entropy(ordered);
  m.text_entropy_bits = e.text_bits;
  m.image_entropy_bits = e.image_bits;
  return m;
}

CascadeMetrics cascade_summary(std::span<const PostRecord> posts, const RepostGraph& graph,
                               double window_hr, std::size_t cascade_id) {
  std::vector<const PostRecord*> refs;
  refs.reserve(posts.size());
  for (const auto& p : posts) refs.push_back(&p);
  return cascade_summary(std::span<const PostRecord* const>(refs), graph, window_hr, cascade_id);
}

std::vector<bool> label_top_quantile(std::span<const double> values, double fraction) {
  if (values.empty()) throw std::invalid_argument("label_top_quantile: empty input");
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("label_top_quantile: fraction must lie in (0, 1)");
  }
  std::vector<double> sorted(values.begin(), values.end());
  // The epsilon keeps products like 0.7 * 10 = 7.000000000000001 from
  // rounding up to an extra item.
  const double raw = fraction * static_cast<double>(sorted.size());
  std::size_t k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end(), std::greater<>());
  const double threshold = sorted[k - 1];
  std::vector<bool> labels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) labels[i] = values[i] >= threshold;
  return labels;
}

std::vector<bool> label_top_quantile_by_group(std::span<const double> values,
                                              std::span<const std::string> groups,
                                              double fraction) {
  if (values.size() != groups.size()) {
    throw std::invalid_argument("label_top_quantile_by_group: size mismatch");
  }
  std::map<std::string_view, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < values.size(); ++i) members[groups[i]].push_back(i);
  std::vector<bool> labels(values.size());
  for (const auto& [_, idx] : members) {
    std::vector<double> sub;
    sub.reserve(idx.size());
    for (std::size_t i : idx) sub.push_back(values[i]);
    const auto sub_labels = label_top_quantile(sub, fraction);
    for (std::size_t k = 0; k < idx.size(); ++k) labels[idx[k]] = sub_labels[k];
  }
  return labels;
}

GroupTable group_stats(std::vector<std::string> columns, std::span<const FlaggedRow> rows) {
  GroupTable table;
  const std::size_t ncol = columns.size();
  table.columns = std::move(columns);
  for (int g = 0; g < 4; ++g) {
    table.rows[g].misinfo = g >= 2;
    table.rows[g].genai = g % 2 == 1;
    table.rows[g].cells.resize(ncol);
  }
  auto group_of = [](const FlaggedRow& r) { return (r.misinfo ? 2 : 0) + (r.genai ? 1 : 0); };

  std::array<std::vector<double>, 4> sums;
  for (auto& s : sums) s.assign(ncol, 0.0);
  for (const auto& r : rows) {
    if (r.values.size() != ncol) throw std::invalid_argument("group_stats: row width mismatch");
    auto& row = table.rows[group_of(r)];
    ++row.rows;
    for (std::size_t c = 0; c < ncol; ++c) {
      if (!r.values[c]) continue;
      ++row.cells[c].count;
      sums[group_of(r)][c] += *r.values[c];
    }
  }
  std::array<std::vector<double>, 4> squares;
  for (int g = 0; g < 4; ++g) {
    squares[g].assign(ncol, 0.0);
    for (std::size_t c = 0; c < ncol; ++c) {
      auto& cell = table.rows[g].cells[c];
      if (cell.count > 0) cell.mean = sums[g][c] / static_cast<double>(cell.count);
    }
  }
  for (const auto& r : rows) {
    const int g = group_of(r);
    for (std::size_t c = 0; c < ncol; ++c) {
      if (!r.values[c]) continue;
      const double d = *r.values[c] - *table.rows[g].cells[c].mean;
      squares[g][c] += d * d;
    }
  }
  for (int g = 0; g < 4; ++g) {
    for (std::size_t c = 0; c < ncol; ++c) {
      auto& cell = table.rows[g].cells[c];
      if (cell.count > 0) cell.stddev = std::sqrt(squares[g][c] / static_cast<double>(cell.count));
    }
  }
  return table;
}

std::vector<PostMetrics> post_metrics(std::span<const PostRecord> posts, std::int64_t reference_utc,
                                      const VaiParams& params) {
  std::vector<PostMetrics> out;
  out.reserve(posts.size());
  for (const auto& p : posts) {
    if (p.created_utc > reference_utc) {
      throw std::invalid_argument(
          fmt::format("post '{}' is newer than the reference timestamp {}", p.id, reference_utc));
    }
    PostMetrics m;
    m.id = p.id;
    m.age_hours = seconds_to_hours(reference_utc - p.created_utc);
    m.vai = vai(p.score, p.total_comments, m.age_hours, params);
    m.engagement_ratio = engagement_ratio(p.total_comments, p.score);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace cascade

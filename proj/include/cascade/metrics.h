#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascade/post_record.h"
#include "cascade/repost_graph.h"

namespace cascade {

// Virality Attention Index weights:
//   VAI = (score + alpha * comments) / (age_hours + tau)^beta
struct VaiParams {
  double alpha = 1.0;
  double beta = 1.0;
  double tau = 1.0;  // hours, must be > 0
};

// Throws std::invalid_argument for negative inputs or tau <= 0.
double vai(std::int64_t score, std::int64_t total_comments, double age_hours,
           const VaiParams& params = {});

// total_comments / max(score, 1)
double engagement_ratio(std::int64_t total_comments, std::int64_t score);

// Mean shortest-path distance over all unordered node pairs of the
// undirected tree; 0 for a singleton.
double structural_virality(const RepostGraph& graph);

// Sum of pairwise distances, exact. Each edge contributes s * (n - s) where s
// is the size of the subtree below it.
std::uint64_t wiener_index(const RepostGraph& graph);

struct TemporalMetrics {
  std::optional<double> time_to_first_repost_hr;
  std::optional<double> peak_repost_speed_hr;
  double lifespan_hr = 0.0;
  std::optional<double> avg_repost_delay_hr;
};

// `created_utc` must be sorted ascending; the first entry is the root.
// Peak repost speed is the offset from the root to the midpoint of the
// reposts inside the densest closed window of width window_hr (earliest
// window on ties). Throws on empty input or window_hr <= 0.
TemporalMetrics temporal_metrics(std::span<const std::int64_t> created_utc,
                                 double window_hr = 24.0);

struct ContentEntropy {
  double text_bits = 0.0;
  double image_bits = 0.0;
};

// Shannon entropy (base 2) of case-folded titles and of canonical image URLs,
// with URL-less posts pooled into one category.
ContentEntropy content_entropy(std::span<const PostRecord* const> posts);

struct CascadeMetrics {
  std::size_t cascade_id = 0;
  std::size_t size = 0;
  std::size_t depth = 0;
  double mean_branch = 0.0;
  double max_branch = 0.0;
  double structural_virality = 0.0;
  std::optional<double> time_to_first_repost_hr;
  std::optional<double> peak_repost_speed_hr;
  double lifespan_hr = 0.0;
  std::optional<double> avg_repost_delay_hr;
  std::size_t num_subreddits = 0;
  std::int64_t total_upvotes = 0;
  double text_entropy_bits = 0.0;
  double image_entropy_bits = 0.0;
  bool misinfo_cascade_flag = false;
  bool genai_cascade_flag = false;
};

// Throws std::invalid_argument when posts and graph disagree on membership.
CascadeMetrics cascade_summary(std::span<const PostRecord* const> posts, const RepostGraph& graph,
                               double window_hr = 24.0, std::size_t cascade_id = 0);
CascadeMetrics cascade_summary(std::span<const PostRecord> posts, const RepostGraph& graph,
                               double window_hr = 24.0, std::size_t cascade_id = 0);

// Marks values at or above the k-th largest value, k = ceil(fraction * n).
// Ties at the threshold are all positive.
std::vector<bool> label_top_quantile(std::span<const double> values, double fraction);

// Same rule applied independently inside each group.
std::vector<bool> label_top_quantile_by_group(std::span<const double> values,
                                              std::span<const std::string> groups,
                                              double fraction);

// ---- grouped summaries ------------------------------------------------------

struct FlaggedRow {
  bool misinfo = false;
  bool genai = false;
  std::vector<std::optional<double>> values;  // aligned with the table columns
};

struct GroupCell {
  std::size_t count = 0;  // rows with a value in this column
  std::optional<double> mean;
  std::optional<double> stddev;  // population
};

struct GroupRow {
  bool misinfo = false;
  bool genai = false;
  std::size_t rows = 0;
  std::vector<GroupCell> cells;
};

struct GroupTable {
  std::vector<std::string> columns;
  std::array<GroupRow, 4> rows;  // (F,F), (F,T), (T,F), (T,T)
};

GroupTable group_stats(std::vector<std::string> columns, std::span<const FlaggedRow> rows);

// ---- post level ---------------------------------------------------------------

struct PostMetrics {
  std::string id;
  double age_hours = 0.0;
  double vai = 0.0;
  double engagement_ratio = 0.0;
};

// Age is measured against `reference_utc` (callers default it to the newest
// post in the dataset). Throws when a post is newer than the reference.
std::vector<PostMetrics> post_metrics(std::span<const PostRecord> posts, std::int64_t reference_utc,
                                      const VaiParams& params = {});

}  // namespace cascade

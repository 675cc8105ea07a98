#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cascade {

// Author value platforms substitute for removed accounts.
inline constexpr std::string_view kDeletedAuthor = "[deleted]";

// One social post as collected, plus the upstream classifier outputs that
// arrive as precomputed columns.
struct PostRecord {
  std::string id;
  std::int64_t created_utc = 0;
  std::string subreddit;
  std::string author;
  std::string title;
  std::optional<std::string> image_url;  // canonical form, see canonicalize_url
  std::optional<std::string> crosspost_parent_id;
  std::int64_t score = 0;
  std::int64_t total_comments = 0;
  std::optional<double> upvote_ratio;
  std::int64_t num_crossposts = 0;
  bool is_original_content = false;
  bool nsfw = false;
  bool misinfo_flag = false;
  bool genai_flag = false;
  std::optional<double> sentiment_compound;
  std::optional<double> sentiment_pos;
  std::optional<double> sentiment_neg;
  std::optional<std::int64_t> thumbnail_width;
  std::optional<std::int64_t> thumbnail_height;
  std::optional<std::string> thumbnail_path;
  // Pass-through numeric columns named obj_* (object-detection flags) or
  // emb_* (embedding dimensions), sorted by name.
  std::vector<std::pair<std::string, double>> extra;

  bool operator==(const PostRecord&) const = default;
};

// Lowercases scheme and host, drops query string and fragment, and strips
// trailing slashes. Idempotent.
std::string canonicalize_url(std::string_view url);

// Returns the first invariant the record violates, or nullopt when valid.
std::optional<std::string> first_violation(const PostRecord& record);

// ASCII case folding; non-ASCII bytes pass through unchanged.
std::string case_fold(std::string_view text);

inline double seconds_to_hours(std::int64_t seconds) {
  return static_cast<double>(seconds) / 3600.0;
}

// Strict weak ordering by (created_utc, id) used everywhere posts are sorted.
inline bool time_order_less(const PostRecord& a, const PostRecord& b) {
  if (a.created_utc != b.created_utc) return a.created_utc < b.created_utc;
  return a.id < b.id;
}

inline bool is_deleted_author(std::string_view author) {
  return author.empty() || author == kDeletedAuthor;
}

}  // namespace cascade

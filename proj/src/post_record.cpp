#include "cascade/post_record.h"

#include <cctype>
#include <cmath>

namespace cascade {

std::string case_fold(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string canonicalize_url(std::string_view url) {
  // Trim surrounding whitespace.
  while (!url.empty() && std::isspace(static_cast<unsigned char>(url.front()))) url.remove_prefix(1);
  while (!url.empty() && std::isspace(static_cast<unsigned char>(url.back()))) url.remove_suffix(1);

  const auto cut = url.find_first_of("?#");
  if (cut != std::string_view::npos) url = url.substr(0, cut);

  std::string out(url);
  const auto scheme_end = out.find("://");
  std::size_t host_end = 0;
  if (scheme_end != std::string::npos) {
    host_end = out.find('/', scheme_end + 3);
    if (host_end == std::string::npos) host_end = out.size();
  }
  for (std::size_t i = 0; i < host_end; ++i) {
    char& c = out[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  while (!out.empty() && out.back() == '/') out.pop_back();
  return out;
}

std::optional<std::string> first_violation(const PostRecord& r) {
  if (r.id.empty()) return "empty id";
  if (r.created_utc <= 0) return "created_utc not positive";
  if (r.score < 0) return "negative score";
  if (r.total_comments < 0) return "negative total_comments";
  if (r.num_crossposts < 0) return "negative num_crossposts";
  if (r.crosspost_parent_id && *r.crosspost_parent_id == r.id) {
    return "crosspost_parent_id equals id";
  }
  auto out_of = [](const std::optional<double>& v, double lo, double hi) {
    return v && (!std::isfinite(*v) || *v < lo || *v > hi);
  };
  if (out_of(r.sentiment_compound, -1.0, 1.0)) return "sentiment_compound outside [-1,1]";
  if (out_of(r.sentiment_pos, 0.0, 1.0)) return "sentiment_pos outside [0,1]";
  if (out_of(r.sentiment_neg, 0.0, 1.0)) return "sentiment_neg outside [0,1]";
  if (out_of(r.upvote_ratio, 0.0, 1.0)) return "upvote_ratio outside [0,1]";
  if (r.thumbnail_width && *r.thumbnail_width <= 0) return "thumbnail_width not positive";
  if (r.thumbnail_height && *r.thumbnail_height <= 0) return "thumbnail_height not positive";
  return std::nullopt;
}

}  // namespace cascade

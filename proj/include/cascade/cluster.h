#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/post_record.h"

namespace cascade {

enum class MergeRule { kUrl, kCrosspost, kSameAuthor };

std::string_view to_string(MergeRule rule);

struct SimilarityConfig {
  // Two thumbnail hashes within this Hamming distance count as the same
  // content for the same-author rule.
  int hash_threshold = 4;
  // Case-folded exact title match when a post has neither URL nor thumbnail.
  bool enable_title_fallback = true;
  // Relative thumbnail paths are resolved against this directory.
  std::filesystem::path thumbnail_root;
  unsigned threads = 1;
};

struct MergeEvent {
  std::string post_a;
  std::string post_b;
  MergeRule rule;

  bool operator==(const MergeEvent&) const = default;
};

struct ClusterReport {
  std::size_t dangling_parents = 0;
  std::size_t unreadable_thumbnails = 0;
  std::size_t url_merges = 0;
  std::size_t crosspost_merges = 0;
  std::size_t same_author_merges = 0;
};

// Partition of posts into cascades. Cascades are ordered by their earliest
// post; members are ordered by (created_utc, id).
struct CascadeSet {
  std::vector<std::vector<std::string>> cascades;
  std::vector<MergeEvent> merge_log;
  ClusterReport report;

  std::size_t post_count() const;
};

// Unions posts connected by (1) equal canonical image URL, (2) crosspost
// parent present in the dataset, (3) same non-deleted author with the same
// content key. Expects validated, deduplicated records.
CascadeSet build_cascades(std::span<const PostRecord> records, const SimilarityConfig& config);

// (post_id, cascade_id) rows.
void write_assignments(std::ostream& out, const CascadeSet& set);
void write_merge_log(std::ostream& out, const CascadeSet& set);

}  // namespace cascade

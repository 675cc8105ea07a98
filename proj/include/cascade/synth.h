#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cascade/features.h"
#include "cascade/post_record.h"

namespace cascade {

enum class TreeShape { kChain, kStar, kRandomTree, kMixed };

std::string_view to_string(TreeShape shape);
TreeShape tree_shape_from_name(std::string_view name);

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t num_cascades = 100;
  // When non-zero every cascade has exactly this many posts; otherwise sizes
  // follow Geometric(size_p) on {1, 2, ...}, capped at max_size.
  std::size_t fixed_size = 0;
  double size_p = 0.4;
  std::size_t max_size = 200;
  TreeShape shape = TreeShape::kMixed;
  // Probability that a repost carries its evidence as an explicit crosspost
  // parent (with its own re-hosted image URL) rather than the shared URL.
  double crosspost_evidence_fraction = 0.5;
  double misinfo_prob = 0.2;  // per cascade; member posts inherit the flag
  double genai_prob = 0.2;
  double mean_gap_hours = 6.0;
  std::size_t subreddit_pool = 5;
  double score_mean = 500.0;
  double comments_mean = 40.0;
  double misinfo_engagement = 3.0;  // multipliers on the engagement means
  double genai_engagement = 0.5;
  std::int64_t start_utc = 1'600'000'000;
  double start_spread_hours = 24.0 * 365.0;
  // Inject dangling crosspost parents and cosmetic URL variants on a
  // fraction of shared-URL posts. Partition evidence stays intact.
  bool degrade = false;
  double degrade_fraction = 0.1;
};

// Throws std::invalid_argument on out-of-range probabilities, non-positive
// gaps, or a zero subreddit pool.
void validate(const SynthConfig& config);

struct SynthTruth {
  // Aligned with SynthDataset::records.
  std::vector<std::size_t> cascade_of;
  std::vector<std::optional<std::string>> planted_parent;
};

struct SynthDataset {
  std::vector<PostRecord> records;
  SynthTruth truth;
};

// Deterministic for a fixed config.
SynthDataset generate(const SynthConfig& config);

// "post_id,cascade_id,parent_id" rows.
void write_truth(std::ostream& out, const SynthDataset& data);

// Mean pairwise BFS distance over all node pairs. Throws
// std::invalid_argument when the graph is disconnected or an edge is out of
// range. Meant as a test oracle.
double oracle_wiener(std::size_t nodes, std::span<const std::pair<std::size_t, std::size_t>> edges);

// Adjusted Rand index between two labelings of the same items; 1.0 for
// identical partitions.
double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

struct PlantedSignalMatrices {
  FeatureMatrix content;
  FeatureMatrix context;
  FeatureMatrix combined;
};

// Cascade-level matrices where the label depends strongly on the context
// columns and weakly on the content columns.
PlantedSignalMatrices planted_signal_matrices(std::uint64_t seed, std::size_t rows);

}  // namespace cascade

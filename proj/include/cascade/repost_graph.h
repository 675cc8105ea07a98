#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cascade/post_record.h"

namespace cascade {

inline constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();

// Time-respecting repost tree of one cascade. Nodes are ordered by
// (created_utc, id); parent[i] < i for every non-root node and the root is
// node 0, so every edge points forward in time.
struct RepostGraph {
  std::vector<std::string> nodes;
  std::vector<std::size_t> parent;

  std::size_t size() const { return nodes.size(); }
  const std::string& root() const { return nodes.front(); }
  // (parent, child) index pairs in child order.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  std::vector<std::size_t> out_degrees() const;

  // Rebuilds a graph from an ordered node list and (parent_id, child_id)
  // edges, checking the tree and time-order invariants. Throws
  // std::invalid_argument on violation.
  static RepostGraph from_edges(std::vector<std::string> ordered_nodes,
                                std::span<const std::pair<std::string, std::string>> edges);
};

// Root is the earliest post. Each later post hangs off its crosspost parent
// when that parent is in the cascade and not later in the ordering, else off
// its immediate predecessor. Throws std::invalid_argument on empty input.
RepostGraph build_repost_graph(std::span<const PostRecord> posts);
RepostGraph build_repost_graph(std::span<const PostRecord* const> posts);

// Edges on the longest root-to-leaf path.
std::size_t depth(const RepostGraph& graph);

struct Branching {
  double mean_out_degree = 0.0;
  std::size_t max_out_degree = 0;
};

Branching branching(const RepostGraph& graph);

// Writes "parent_id,child_id,cascade_id" rows (no header).
void write_edge_list(std::ostream& out, const RepostGraph& graph, std::size_t cascade_id);

}  // namespace cascade

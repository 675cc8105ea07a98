#include "cascade/repost_graph.h"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "cascade/ingest.h"

namespace cascade {

std::vector<std::pair<std::size_t, std::size_t>> RepostGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(nodes.empty() ? 0 : nodes.size() - 1);
  for (std::size_t i = 1; i < parent.size(); ++i) out.emplace_back(parent[i], i);
  return out;
}

std::vector<std::size_t> RepostGraph::out_degrees() const {
  std::vector<std::size_t> degree(nodes.size(), 0);
  for (std::size_t i = 1; i < parent.size(); ++i) ++degree[parent[i]];
  return degree;
}

RepostGraph RepostGraph::from_edges(std::vector<std::string> ordered_nodes,
                                    std::span<const std::pair<std::string, std::string>> edges) {
  if (ordered_nodes.empty()) throw std::invalid_argument("graph has no nodes");
  if (edges.size() + 1 != ordered_nodes.size()) {
    throw std::invalid_argument(fmt::format("{} nodes need {} edges, got {}", ordered_nodes.size(),
                                            ordered_nodes.size() - 1, edges.size()));
  }
  std::unordered_map<std::string_view, std::size_t> index_of;
  for (std::size_t i = 0; i < ordered_nodes.size(); ++i) {
    if (!index_of.try_emplace(ordered_nodes[i], i).second) {
      throw std::invalid_argument(fmt::format("duplicate node '{}'", ordered_nodes[i]));
    }
  }
  RepostGraph g;
  g.parent.assign(ordered_nodes.size(), kNoParent);
  for (const auto& [from, to] : edges) {
    auto p = index_of.find(from);
    auto c = index_of.find(to);
    if (p == index_of.end() || c == index_of.end()) {
      throw std::invalid_argument(fmt::format("edge {} -> {} references unknown node", from, to));
    }
    if (p->second >= c->second) {
      throw std::invalid_argument(fmt::format("edge {} -> {} is not time-respecting", from, to));
    }
    if (g.parent[c->second] != kNoParent) {
      throw std::invalid_argument(fmt::format("node '{}' has two parents", to));
    }
    g.parent[c->second] = p->second;
  }
  // Every non-root node has a parent and parents precede children, so the
  // structure is a tree rooted at node 0.
  g.nodes = std::move(ordered_nodes);
  return g;
}

RepostGraph build_repost_graph(std::span<const PostRecord* const> posts) {
  if (posts.empty()) throw std::invalid_argument("cannot build a repost graph from no posts");
  std::vector<const PostRecord*> ordered(posts.begin(), posts.end());
  std::sort(ordered.begin(), ordered.end(),
            [](const PostRecord* a, const PostRecord* b) { return time_order_less(*a, *b); });

  RepostGraph g;
  g.nodes.reserve(ordered.size());
  g.parent.assign(ordered.size(), kNoParent);
  std::unordered_map<std::string_view, std::size_t> index_of;
  index_of.reserve(ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    g.nodes.push_back(ordered[i]->id);
    index_of.try_emplace(ordered[i]->id, i);
  }
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    std::size_t parent = i - 1;
    const auto& xp = ordered[i]->crosspost_parent_id;
    if (xp && *xp != ordered[i]->id) {
      auto it = index_of.find(*xp);
      if (it != index_of.end() && it->second < i) parent = it->second;
    }
    g.parent[i] = parent;
  }
  return g;
}

RepostGraph build_repost_graph(std::span<const PostRecord> posts) {
  std::vector<const PostRecord*> refs;
  refs.reserve(posts.size());
  for (const auto& p : posts) refs.push_back(&p);
  return build_repost_graph(std::span<const PostRecord* const>(refs));
}

std::size_t depth(const RepostGraph& graph) {
  std::vector<std::size_t> level(graph.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 1; i < graph.size(); ++i) {
    level[i] = level[graph.parent[i]] + 1;
    deepest = std::max(deepest, level[i]);
  }
  return deepest;
}

Branching branching(const RepostGraph& graph) {
  if (graph.size() <= 1) return {};
  const auto degree = graph.out_degrees();
  Branching b;
  b.max_out_degree = *std::max_element(degree.begin(), degree.end());
  b.mean_out_degree = static_cast<double>(graph.size() - 1) / static_cast<double>(graph.size());
  return b;
}

void write_edge_list(std::ostream& out, const RepostGraph& graph, std::size_t cascade_id) {
  for (std::size_t i = 1; i < graph.size(); ++i) {
    out << quote_field(graph.nodes[graph.parent[i]]) << ',' << quote_field(graph.nodes[i]) << ','
        << cascade_id << '\n';
  }
}

}  // namespace cascade

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cascade/post_record.h"
#include "cascade/random.h"
#include "cascade/repost_graph.h"

namespace cascade::testing {

inline PostRecord make_post(std::string id, std::int64_t created_utc, std::string subreddit = "s1") {
  PostRecord p;
  p.id = std::move(id);
  p.created_utc = created_utc;
  p.subreddit = std::move(subreddit);
  return p;
}

// Random recursive tree: node i > 0 hangs off a uniform earlier node.
inline RepostGraph random_tree(std::size_t n, Rng& rng) {
  RepostGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back("n" + std::to_string(i));
    g.parent.push_back(i == 0 ? kNoParent : static_cast<std::size_t>(uniform_index(rng, i)));
  }
  return g;
}

inline RepostGraph chain(std::size_t n) {
  RepostGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back("n" + std::to_string(i));
    g.parent.push_back(i == 0 ? kNoParent : i - 1);
  }
  return g;
}

inline RepostGraph star(std::size_t n) {
  RepostGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back("n" + std::to_string(i));
    g.parent.push_back(i == 0 ? kNoParent : 0);
  }
  return g;
}

}  // namespace cascade::testing

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cascade {

// Union-find over dense indices [0, size) with path compression and union by
// rank. find() and unite() throw std::out_of_range for invalid indices.
class DisjointSet {
 public:
  explicit DisjointSet(std::size_t size);

  std::size_t find(std::size_t element);
  // Returns true when the two elements were in different sets.
  bool unite(std::size_t left, std::size_t right);

  std::size_t size() const { return parent_.size(); }
  std::size_t count_sets() const { return sets_; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::uint8_t> rank_;
  std::size_t sets_;
};

}  // namespace cascade

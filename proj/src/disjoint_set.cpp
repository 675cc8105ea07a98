#include "cascade/disjoint_set.h"

#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace cascade {

DisjointSet::DisjointSet(std::size_t size) : parent_(size), rank_(size, 0), sets_(size) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t DisjointSet::find(std::size_t element) {
  if (element >= parent_.size()) {
    throw std::out_of_range("DisjointSet index " + std::to_string(element) + " out of range");
  }
  std::size_t root = element;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[element] != root) {
    const std::size_t next = parent_[element];
    parent_[element] = root;
    element = next;
  }
  return root;
}

bool DisjointSet::unite(std::size_t left, std::size_t right) {
  left = find(left);
  right = find(right);
  if (left == right) return false;
  if (rank_[left] < rank_[right]) std::swap(left, right);
  parent_[right] = left;
  if (rank_[left] == rank_[right]) ++rank_[left];
  --sets_;
  return true;
}

}  // namespace cascade

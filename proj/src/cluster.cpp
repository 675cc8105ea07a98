#include "cascade/cluster.h"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <optional>
#include <ostream>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "cascade/disjoint_set.h"
#include "cascade/image.h"
#include "cascade/ingest.h"

namespace cascade {

namespace {

class Merger {
 public:
  Merger(std::span<const PostRecord> records, CascadeSet& out)
      : records_(records), dsu_(records.size()), out_(out) {}

  void merge(std::size_t a, std::size_t b, MergeRule rule) {
    if (!dsu_.unite(a, b)) return;
    out_.merge_log.push_back({records_[a].id, records_[b].id, rule});
    switch (rule) {
      case MergeRule::kUrl: ++out_.report.url_merges; break;
      case MergeRule::kCrosspost: ++out_.report.crosspost_merges; break;
      case MergeRule::kSameAuthor: ++out_.report.same_author_merges; break;
    }
  }

  DisjointSet& dsu() { return dsu_; }

 private:
  std::span<const PostRecord> records_;
  DisjointSet dsu_;
  CascadeSet& out_;
};

std::optional<std::uint64_t> thumbnail_hash(const PostRecord& r, const SimilarityConfig& config) {
  std::filesystem::path path = *r.thumbnail_path;
  if (path.is_relative() && !config.thumbnail_root.empty()) path = config.thumbnail_root / path;
  try {
    return difference_hash(to_luma(load_image(path)));
  } catch (const ImageError&) {
    return std::nullopt;
  }
}

// Splits 64 bits into `bands` contiguous ranges. Two hashes within Hamming
// distance bands - 1 agree exactly on at least one band (pigeonhole).
std::vector<std::uint64_t> band_values(std::uint64_t hash, int bands) {
  std::vector<std::uint64_t> out;
  out.reserve(bands);
  int start = 0;
  for (int b = 0; b < bands; ++b) {
    const int width = 64 / bands + (b < 64 % bands ? 1 : 0);
    const std::uint64_t mask = width == 64 ? ~0ULL : ((1ULL << width) - 1);
    out.push_back((hash >> start) & mask);
    start += width;
  }
  return out;
}

void merge_near_hashes(std::span<const std::pair<std::size_t, std::uint64_t>> hashed,
                       std::span<const PostRecord> records, int threshold, Merger& merger) {
  if (threshold < 0) return;
  const int bands = std::min(threshold + 1, 64);
  std::unordered_map<std::string, std::vector<std::size_t>> buckets;
  for (std::size_t k = 0; k < hashed.size(); ++k) {
    const auto& [index, hash] = hashed[k];
    const auto values = band_values(hash, bands);
    for (int b = 0; b < bands; ++b) {
      buckets[fmt::format("{}\x1f{}\x1f{}", records[index].author, b, values[b])].push_back(k);
    }
  }
  // Iterate buckets in a fixed order so the merge log is reproducible.
  std::vector<const std::vector<std::size_t>*> ordered;
  ordered.reserve(buckets.size());
  for (const auto& [_, members] : buckets) ordered.push_back(&members);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return *a < *b; });
  for (const auto* members : ordered) {
    for (std::size_t i = 0; i < members->size(); ++i) {
      for (std::size_t j = i + 1; j < members->size(); ++j) {
        const auto& [ia, ha] = hashed[(*members)[i]];
        const auto& [ib, hb] = hashed[(*members)[j]];
        if (hamming_distance(ha, hb) <= threshold) merger.merge(ia, ib, MergeRule::kSameAuthor);
      }
    }
  }
}

}  // namespace

std::string_view to_string(MergeRule rule) {
  switch (rule) {
    case MergeRule::kUrl: return "url";
    case MergeRule::kCrosspost: return "crosspost";
    case MergeRule::kSameAuthor: return "same_author";
  }
  return "unknown";
}

std::size_t CascadeSet::post_count() const {
  std::size_t n = 0;
  for (const auto& c : cascades) n += c.size();
  return n;
}

CascadeSet build_cascades(std::span<const PostRecord> records, const SimilarityConfig& config) {
  CascadeSet out;
  Merger merger(records, out);

  // Rule 1: identical canonical image URL.
  {
    std::unordered_map<std::string_view, std::size_t> first_by_url;
    first_by_url.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!records[i].image_url) continue;
      auto [it, inserted] = first_by_url.try_emplace(*records[i].image_url, i);
      if (!inserted) merger.merge(it->second, i, MergeRule::kUrl);
    }
  }

  // Rule 2: crosspost parent present in the dataset.
  {
    std::unordered_map<std::string_view, std::size_t> index_of;
    index_of.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) index_of.try_emplace(records[i].id, i);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& parent = records[i].crosspost_parent_id;
      if (!parent || *parent == records[i].id) continue;
      auto it = index_of.find(*parent);
      if (it == index_of.end()) {
        ++out.report.dangling_parents;
        continue;
      }
      merger.merge(it->second, i, MergeRule::kCrosspost);
    }
  }

  // Rule 3: same author, same content key.
  {
    std::unordered_map<std::string, std::size_t> first_by_key;
    std::vector<std::size_t> needs_hash;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (is_deleted_author(r.author)) continue;
      if (r.image_url) {
        auto [it, inserted] = first_by_key.try_emplace(fmt::format("u\x1f{}\x1f{}", r.author, *r.image_url), i);
        if (!inserted) merger.merge(it->second, i, MergeRule::kSameAuthor);
      } else if (r.thumbnail_path) {
        needs_hash.push_back(i);
      }
    }

    std::vector<std::optional<std::uint64_t>> hashes(needs_hash.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, needs_hash.size()));
    {
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t k = next++; k < needs_hash.size(); k = next++) {
            hashes[k] = thumbnail_hash(records[needs_hash[k]], config);
          }
        });
      }
    }

    std::vector<std::pair<std::size_t, std::uint64_t>> hashed;
    std::vector<std::size_t> title_keyed;
    for (std::size_t k = 0; k < needs_hash.size(); ++k) {
      if (hashes[k]) {
        hashed.emplace_back(needs_hash[k], *hashes[k]);
      } else {
        ++out.report.unreadable_thumbnails;
        title_keyed.push_back(needs_hash[k]);
      }
    }
    merge_near_hashes(hashed, records, config.hash_threshold, merger);

    if (config.enable_title_fallback) {
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!is_deleted_author(r.author) && !r.image_url && !r.thumbnail_path) title_keyed.push_back(i);
      }
      std::sort(title_keyed.begin(), title_keyed.end());
      for (std::size_t i : title_keyed) {
        const auto& r = records[i];
        if (r.title.empty()) continue;
        auto [it, inserted] =
            first_by_key.try_emplace(fmt::format("t\x1f{}\x1f{}", r.author, case_fold(r.title)), i);
        if (!inserted) merger.merge(it->second, i, MergeRule::kSameAuthor);
      }
    }
  }

  // Materialize components.
  auto& dsu = merger.dsu();
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return time_order_less(records[a], records[b]);
  });
  std::unordered_map<std::size_t, std::size_t> cascade_of_root;
  cascade_of_root.reserve(dsu.count_sets());
  out.cascades.reserve(dsu.count_sets());
  for (std::size_t i : order) {
    const std::size_t root = dsu.find(i);
    auto [it, inserted] = cascade_of_root.try_emplace(root, out.cascades.size());
    if (inserted) out.cascades.emplace_back();
    out.cascades[it->second].push_back(records[i].id);
  }
  return out;
}

void write_assignments(std::ostream& out, const CascadeSet& set) {
  out << "post_id,cascade_id\n";
  for (std::size_t c = 0; c < set.cascades.size(); ++c) {
    for (const auto& id : set.cascades[c]) out << quote_field(id) << ',' << c << '\n';
  }
}

void write_merge_log(std::ostream& out, const CascadeSet& set) {
  out << "post_a,post_b,rule\n";
  for (const auto& e : set.merge_log) {
    out << quote_field(e.post_a) << ',' << quote_field(e.post_b) << ',' << to_string(e.rule)
        << '\n';
  }
}

}  // namespace cascade

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/metrics.h"
#include "cascade/post_record.h"

namespace cascade {

enum class FeatureGroup {
  kText,
  kImage,
  kMetadata,
  kAttention,  // VAI; the post-level label source, never a content predictor
  kCascadeContent,
  kCascadeContext,
};

enum class CascadeMode { kContentOnly, kContextOnly, kCombined };

std::string_view to_string(CascadeMode mode);
// "content", "context", "combined"; throws std::invalid_argument otherwise.
CascadeMode cascade_mode_from_name(std::string_view name);

struct FeatureSpec {
  std::string name;
  FeatureGroup group;
};

// Fixed post-level registry. Extra pass-through columns (obj_*, emb_*) are
// appended by the caller in sorted order.
const std::vector<FeatureSpec>& post_feature_registry();
const std::vector<FeatureSpec>& cascade_context_registry();

struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;
  std::optional<bool> label;

  // Throws std::out_of_range for unknown names.
  double get(std::string_view name) const;
};

// Row-major matrix whose rows share one column list.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  // Throws std::invalid_argument when the vector's names differ from the
  // matrix columns.
  void append(std::string row_id, const FeatureVector& vector);
  void append_row(std::string row_id, std::span<const double> values, std::optional<bool> label);

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::string>& row_ids() const { return row_ids_; }
  std::size_t rows() const { return row_ids_.size(); }
  std::size_t cols() const { return columns_.size(); }
  double at(std::size_t r, std::size_t c) const { return values_[r * columns_.size() + c]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * columns_.size() + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * columns_.size(), columns_.size()};
  }
  bool labeled() const;
  std::vector<bool> labels() const;
  void set_labels(const std::vector<bool>& labels);

  std::optional<std::size_t> column_index(std::string_view name) const;
  FeatureMatrix select_columns(std::span<const std::string> names) const;
  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> row_ids_;
  std::vector<double> values_;
  std::vector<std::optional<bool>> labels_;
};

// Header "id,<columns...>,label"; label cell empty for unlabeled rows.
void write_feature_matrix(std::ostream& out, const FeatureMatrix& matrix);
FeatureMatrix read_feature_matrix(std::string_view csv_text);

// ---- extraction -----------------------------------------------------------------

std::vector<std::string> default_clickbait_keywords();

struct TextFeatures {
  std::size_t title_length = 0;  // Unicode code points
  bool clickbait = false;
};

// Case-insensitive keyword match at word boundaries.
TextFeatures text_features(std::string_view title, std::span<const std::string> keywords);

struct ImageFeatures {
  double laplacian_variance = 0.0;
  double noise_score = 0.0;
  double ela_score = 0.0;
};

// Throws ImageError when the thumbnail is missing or undecodable.
ImageFeatures image_features(const std::filesystem::path& path, int ela_quality = 90);

struct DerivedFeatures {
  TextFeatures text;
  std::optional<ImageFeatures> image;
};

// Post vector in registry order followed by `extra_columns`; groups of
// optional inputs carry a *_missing indicator.
FeatureVector assemble_post_features(const PostRecord& record, const DerivedFeatures& derived,
                                     double vai_value,
                                     std::span<const std::string> extra_columns = {});

// Column names produced by assemble_post_features for the given extras.
std::vector<std::string> post_feature_names(std::span<const std::string> extra_columns = {});
// Post columns that describe content (text and image groups, plus content
// pass-through columns).
std::vector<std::string> post_content_columns(std::span<const std::string> extra_columns = {});

// Cascade vector for the requested mode. `post_vectors` align with
// `cascade_posts`.
FeatureVector assemble_cascade_features(std::span<const PostRecord* const> cascade_posts,
                                        std::span<const FeatureVector> post_vectors,
                                        const CascadeMetrics& metrics, CascadeMode mode);

std::vector<std::string> cascade_feature_names(CascadeMode mode,
                                               std::span<const std::string> post_content_names);

}  // namespace cascade

#include "cascade/features.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>

#include "cascade/image.h"
#include "cascade/ingest.h"

namespace cascade {

namespace {

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

bool is_content_extra(std::string_view name) {
  return name.starts_with("emb_") || name.starts_with("obj_");
}

double flag(bool b) { return b ? 1.0 : 0.0; }

const std::vector<std::string>& context_names() {
  static const std::vector<std::string> names = {
      "time_to_first_repost_hr", "avg_repost_delay_hr", "peak_repost_speed_hr",
      "repost_timing_missing",   "lifespan_hr",         "num_subreddits",
      "mean_branch",             "max_branch"};
  return names;
}

const std::vector<std::string>& content_summary_names() {
  static const std::vector<std::string> names = {"misinfo_count", "genai_count",
                                                 "text_entropy_bits", "image_entropy_bits"};
  return names;
}

}  // namespace

std::string_view to_string(CascadeMode mode) {
  switch (mode) {
    case CascadeMode::kContentOnly: return "content";
    case CascadeMode::kContextOnly: return "context";
    case CascadeMode::kCombined: return "combined";
  }
  return "unknown";
}

CascadeMode cascade_mode_from_name(std::string_view name) {
  if (name == "content" || name == "content_only") return CascadeMode::kContentOnly;
  if (name == "context" || name == "context_only") return CascadeMode::kContextOnly;
  if (name == "combined") return CascadeMode::kCombined;
  throw std::invalid_argument(fmt::format("unknown feature mode '{}'", name));
}

const std::vector<FeatureSpec>& post_feature_registry() {
  static const std::vector<FeatureSpec> registry = {
      {"title_length", FeatureGroup::kText},
      {"clickbait_flag", FeatureGroup::kText},
      {"sentiment_compound", FeatureGroup::kText},
      {"sentiment_pos", FeatureGroup::kText},
      {"sentiment_neg", FeatureGroup::kText},
      {"sentiment_missing", FeatureGroup::kText},
      {"laplacian_variance", FeatureGroup::kImage},
      {"noise_score", FeatureGroup::kImage},
      {"ela_score", FeatureGroup::kImage},
      {"image_missing", FeatureGroup::kImage},
      {"thumb_width", FeatureGroup::kImage},
      {"thumb_height", FeatureGroup::kImage},
      {"thumb_dims_missing", FeatureGroup::kImage},
      {"misinfo_flag", FeatureGroup::kImage},
      {"genai_flag", FeatureGroup::kImage},
      {"upvote_ratio", FeatureGroup::kMetadata},
      {"upvote_ratio_missing", FeatureGroup::kMetadata},
      {"num_crossposts", FeatureGroup::kMetadata},
      {"is_crossposted", FeatureGroup::kMetadata},
      {"is_original_content", FeatureGroup::kMetadata},
      {"hour_of_day", FeatureGroup::kMetadata},
      {"engagement_ratio", FeatureGroup::kMetadata},
      {"vai", FeatureGroup::kAttention},
  };
  return registry;
}

const std::vector<FeatureSpec>& cascade_context_registry() {
  static const std::vector<FeatureSpec> registry = [] {
    std::vector<FeatureSpec> r;
    for (const auto& n : context_names()) r.push_back({n, FeatureGroup::kCascadeContext});
    return r;
  }();
  return registry;
}

double FeatureVector::get(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  throw std::out_of_range(fmt::format("no feature named '{}'", name));
}

// ---- FeatureMatrix ------------------------------------------------------------

void FeatureMatrix::append(std::string row_id, const FeatureVector& v) {
  if (v.names != columns_) {
    throw std::invalid_argument(fmt::format("feature vector for '{}' does not match matrix columns", row_id));
  }
  append_row(std::move(row_id), v.values, v.label);
}

void FeatureMatrix::append_row(std::string row_id, std::span<const double> values,
                               std::optional<bool> label) {
  if (values.size() != columns_.size()) {
    throw std::invalid_argument(fmt::format("row '{}' has {} values, matrix has {} columns", row_id,
                                            values.size(), columns_.size()));
  }
  row_ids_.push_back(std::move(row_id));
  values_.insert(values_.end(), values.begin(), values.end());
  labels_.push_back(label);
}

bool FeatureMatrix::labeled() const {
  return !labels_.empty() &&
         std::all_of(labels_.begin(), labels_.end(), [](const auto& l) { return l.has_value(); });
}

std::vector<bool> FeatureMatrix::labels() const {
  std::vector<bool> out;
  out.reserve(labels_.size());
  for (const auto& l : labels_) {
    if (!l) throw std::logic_error("matrix has unlabeled rows");
    out.push_back(*l);
  }
  return out;
}

void FeatureMatrix::set_labels(const std::vector<bool>& labels) {
  if (labels.size() != rows()) throw std::invalid_argument("label count does not match rows");
  for (std::size_t i = 0; i < labels.size(); ++i) labels_[i] = labels[i];
}

std::optional<std::size_t> FeatureMatrix::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i] == name) return i;
  }
  return std::nullopt;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::string> names) const {
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    auto i = column_index(n);
    if (!i) throw std::invalid_argument(fmt::format("no column named '{}'", n));
    idx.push_back(*i);
  }
  FeatureMatrix out(std::vector<std::string>(names.begin(), names.end()));
  std::vector<double> buffer(idx.size());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t k = 0; k < idx.size(); ++k) buffer[k] = at(r, idx[k]);
    out.append_row(row_ids_[r], buffer, labels_[r]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows_to_keep) const {
  FeatureMatrix out(columns_);
  for (std::size_t r : rows_to_keep) out.append_row(row_ids_.at(r), row(r), labels_.at(r));
  return out;
}

void write_feature_matrix(std::ostream& out, const FeatureMatrix& m) {
  out << "id";
  for (const auto& c : m.columns()) out << ',' << quote_field(c);
  out << ",label\n";
  const bool has_labels = m.labeled();
  const auto labels = has_labels ? m.labels() : std::vector<bool>{};
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << quote_field(m.row_ids()[r]);
    for (std::size_t c = 0; c < m.cols(); ++c) out << ',' << fmt::format("{}", m.at(r, c));
    out << ',';
    if (has_labels) out << (labels[r] ? '1' : '0');
    out << '\n';
  }
}

FeatureMatrix read_feature_matrix(std::string_view text) {
  DelimitedReader reader(text);
  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!reader.next(fields, line) || fields.size() < 2 || fields.front() != "id" ||
      fields.back() != "label") {
    throw std::invalid_argument("feature matrix header must be id,...,label");
  }
  FeatureMatrix m(std::vector<std::string>(fields.begin() + 1, fields.end() - 1));
  std::vector<double> values(m.cols());
  while (reader.next(fields, line)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != m.cols() + 2) {
      throw std::invalid_argument(fmt::format("feature matrix line {}: wrong field count", line));
    }
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const auto& f = fields[c + 1];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), values[c]);
      if (ec != std::errc() || p != f.data() + f.size()) {
        throw std::invalid_argument(fmt::format("feature matrix line {}: bad number '{}'", line, f));
      }
    }
    std::optional<bool> label;
    if (fields.back() == "1") label = true;
    else if (fields.back() == "0") label = false;
    else if (!fields.back().empty()) {
      throw std::invalid_argument(fmt::format("feature matrix line {}: bad label", line));
    }
    m.append_row(fields[0], values, label);
  }
  return m;
}

// ---- extraction -----------------------------------------------------------------

std::vector<std::string> default_clickbait_keywords() { return {"breaking", "viral", "shocking"}; }

TextFeatures text_features(std::string_view title, std::span<const std::string> keywords) {
  TextFeatures f;
  for (unsigned char c : title) {
    if ((c & 0xC0) != 0x80) ++f.title_length;
  }
  const std::string folded = case_fold(title);
  for (const auto& raw_keyword : keywords) {
    const std::string keyword = case_fold(raw_keyword);
    if (keyword.empty()) continue;
    for (auto pos = folded.find(keyword); pos != std::string::npos;
         pos = folded.find(keyword, pos + 1)) {
      const bool left_ok = pos == 0 || !is_word_byte(folded[pos - 1]);
      const auto end = pos + keyword.size();
      const bool right_ok = end == folded.size() || !is_word_byte(folded[end]);
      if (left_ok && right_ok) {
        f.clickbait = true;
        return f;
      }
    }
  }
  return f;
}

ImageFeatures image_features(const std::filesystem::path& path, int ela_quality) {
  const Image image = load_image(path);
  const GrayPlane luma = to_luma(image);
  ImageFeatures f;
  f.laplacian_variance = laplacian_variance(luma);
  f.noise_score = noise_score(luma);
  f.ela_score = ela_score(image, ela_quality);
  return f;
}

std::vector<std::string> post_feature_names(std::span<const std::string> extra_columns) {
  std::vector<std::string> names;
  for (const auto& spec : post_feature_registry()) names.push_back(spec.name);
  bool has_emb = false;
  bool has_obj = false;
  for (const auto& e : extra_columns) {
    names.push_back(e);
    has_emb = has_emb || e.starts_with("emb_");
    has_obj = has_obj || e.starts_with("obj_");
  }
  if (has_emb) names.push_back("emb_missing");
  if (has_obj) names.push_back("obj_missing");
  return names;
}

std::vector<std::string> post_content_columns(std::span<const std::string> extra_columns) {
  std::vector<std::string> names;
  for (const auto& spec : post_feature_registry()) {
    if (spec.group == FeatureGroup::kText || spec.group == FeatureGroup::kImage) {
      names.push_back(spec.name);
    }
  }
  for (const auto& n : post_feature_names(extra_columns)) {
    if (is_content_extra(n)) names.push_back(n);
  }
  return names;
}

FeatureVector assemble_post_features(const PostRecord& r, const DerivedFeatures& d,
                                     double vai_value, std::span<const std::string> extra_columns) {
  FeatureVector v;
  v.names = post_feature_names(extra_columns);
  v.values.reserve(v.names.size());
  auto push = [&](double x) { v.values.push_back(x); };

  push(static_cast<double>(d.text.title_length));
  push(flag(d.text.clickbait));
  const bool sentiment_missing = !r.sentiment_compound || !r.sentiment_pos || !r.sentiment_neg;
  push(r.sentiment_compound.value_or(0.0));
  push(r.sentiment_pos.value_or(0.0));
  push(r.sentiment_neg.value_or(0.0));
  push(flag(sentiment_missing));

  push(d.image ? d.image->laplacian_variance : 0.0);
  push(d.image ? d.image->noise_score : 0.0);
  push(d.image ? d.image->ela_score : 0.0);
  push(flag(!d.image));
  const bool dims_missing = !r.thumbnail_width || !r.thumbnail_height;
  push(static_cast<double>(r.thumbnail_width.value_or(0)));
  push(static_cast<double>(r.thumbnail_height.value_or(0)));
  push(flag(dims_missing));
  push(flag(r.misinfo_flag));
  push(flag(r.genai_flag));

  push(r.upvote_ratio.value_or(0.0));
  push(flag(!r.upvote_ratio));
  push(static_cast<double>(r.num_crossposts));
  push(flag(r.crosspost_parent_id.has_value() || r.num_crossposts > 0));
  push(flag(r.is_original_content));
  // Floor division so pre-1970 timestamps still land in [0, 24).
  const std::int64_t hours = r.created_utc >= 0 ? r.created_utc / 3600 : (r.created_utc - 3599) / 3600;
  push(static_cast<double>(((hours % 24) + 24) % 24));
  push(engagement_ratio(r.total_comments, r.score));
  push(vai_value);

  bool emb_missing = false;
  bool obj_missing = false;
  for (const auto& name : extra_columns) {
    auto it = std::lower_bound(r.extra.begin(), r.extra.end(), name,
                               [](const auto& kv, const std::string& k) { return kv.first < k; });
    const bool present = it != r.extra.end() && it->first == name;
    push(present ? it->second : 0.0);
    if (!present) {
      emb_missing = emb_missing || name.starts_with("emb_");
      obj_missing = obj_missing || name.starts_with("obj_");
    }
  }
  for (std::size_t i = v.values.size(); i < v.names.size(); ++i) {
    push(flag(v.names[i] == "emb_missing" ? emb_missing : obj_missing));
  }
  return v;
}

std::vector<std::string> cascade_feature_names(CascadeMode mode,
                                               std::span<const std::string> post_content_names) {
  std::vector<std::string> names;
  if (mode != CascadeMode::kContextOnly) {
    for (const auto& n : post_content_names) names.push_back("mean_" + n);
    for (const auto& n : content_summary_names()) names.push_back(n);
  }
  if (mode != CascadeMode::kContentOnly) {
    for (const auto& n : context_names()) names.push_back(n);
  }
  return names;
}

FeatureVector assemble_cascade_features(std::span<const PostRecord* const> posts,
                                        std::span<const FeatureVector> post_vectors,
                                        const CascadeMetrics& m, CascadeMode mode) {
  if (posts.empty()) throw std::invalid_argument("assemble_cascade_features: empty cascade");
  if (posts.size() != post_vectors.size()) {
    throw std::invalid_argument("assemble_cascade_features: vectors not aligned with posts");
  }
  // Content columns are taken from the first vector; all vectors must agree.
  std::vector<std::string> content;
  std::vector<std::size_t> content_idx;
  const auto& names = post_vectors.front().names;
  const auto registry_content = post_content_columns();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const bool in_registry =
        std::find(registry_content.begin(), registry_content.end(), names[i]) != registry_content.end();
    if (in_registry || is_content_extra(names[i])) {
      content.push_back(names[i]);
      content_idx.push_back(i);
    }
  }

  FeatureVector v;
  v.names = cascade_feature_names(mode, content);
  if (mode != CascadeMode::kContextOnly) {
    std::vector<double> sums(content.size(), 0.0);
    std::size_t misinfo = 0;
    std::size_t genai = 0;
    for (std::size_t p = 0; p < posts.size(); ++p) {
      if (post_vectors[p].names != names) {
        throw std::invalid_argument("assemble_cascade_features: post vectors disagree on columns");
      }
      for (std::size_t k = 0; k < content_idx.size(); ++k) sums[k] += post_vectors[p].values[content_idx[k]];
      misinfo += posts[p]->misinfo_flag ? 1 : 0;
      genai += posts[p]->genai_flag ? 1 : 0;
    }
    for (double s : sums) v.values.push_back(s / static_cast<double>(posts.size()));
    v.values.push_back(static_cast<double>(misinfo));
    v.values.push_back(static_cast<double>(genai));
    v.values.push_back(m.text_entropy_bits);
    v.values.push_back(m.image_entropy_bits);
  }
  if (mode != CascadeMode::kContentOnly) {
    v.values.push_back(m.time_to_first_repost_hr.value_or(0.0));
    v.values.push_back(m.avg_repost_delay_hr.value_or(0.0));
    v.values.push_back(m.peak_repost_speed_hr.value_or(0.0));
    v.values.push_back(flag(!m.time_to_first_repost_hr));
    v.values.push_back(m.lifespan_hr);
    v.values.push_back(static_cast<double>(m.num_subreddits));
    v.values.push_back(m.mean_branch);
    v.values.push_back(m.max_branch);
  }
  return v;
}

}  // namespace cascade

#include "cascade/pipeline.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "cascade/features.h"
#include "cascade/image.h"
#include "cascade/random.h"
#include "cascade/report.h"
#include "cascade/repost_graph.h"

namespace cascade {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kPosts = "posts.jsonl";
constexpr const char* kCascades = "cascades.csv";
constexpr const char* kEdges = "edges.csv";
constexpr const char* kPostMetrics = "post_metrics.csv";
constexpr const char* kCascadeMetrics = "cascade_metrics.csv";
constexpr const char* kFeaturesPost = "features_post.csv";
constexpr const char* kManifest = "manifest.json";

std::string number(double v) { return fmt::format("{}", v); }
std::string number(const std::optional<double>& v) { return v ? number(*v) : std::string(); }

double to_double(const std::string& s, std::string_view what) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(fmt::format("{}: '{}' is not a number", what, s));
  }
  return out;
}

std::optional<double> to_optional(const std::string& s, std::string_view what) {
  if (s.empty()) return std::nullopt;
  return to_double(s, what);
}

template <typename T>
T to_integer(const std::string& s, std::string_view what) {
  T out{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(fmt::format("{}: '{}' is not an integer", what, s));
  }
  return out;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    std::string_view item = text.substr(0, comma);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream s;
  fn(s);
  write_text(path, s.str());
}

std::string read_artifact(const PipelineConfig& cfg, std::string_view name) {
  const fs::path path = cfg.output_dir / name;
  if (!fs::exists(path)) {
    throw std::runtime_error(fmt::format("missing artifact {}", path.string()));
  }
  return read_file(path);
}

// ---- shared readers ------------------------------------------------------------

struct Corpus {
  std::vector<PostRecord> posts;  // sorted by (created_utc, id)
  std::unordered_map<std::string, std::size_t> index;
};

Corpus load_posts(const PipelineConfig& cfg) {
  const fs::path path = cfg.output_dir / kPosts;
  if (!fs::exists(path)) throw std::runtime_error(fmt::format("missing artifact {}", path.string()));
  Corpus c;
  c.posts = read_posts_file(path, InputFormat::kJsonLines, true, cfg.threads).records;
  c.index.reserve(c.posts.size());
  for (std::size_t i = 0; i < c.posts.size(); ++i) c.index.emplace(c.posts[i].id, i);
  return c;
}

// Member indices per cascade, ascending (which is time order).
std::vector<std::vector<std::size_t>> load_cascades(const PipelineConfig& cfg, const Corpus& corpus) {
  const std::string text = read_artifact(cfg, kCascades);
  DelimitedReader reader(text);
  std::vector<std::string> f;
  std::size_t line = 0;
  if (!reader.next(f, line) || f != std::vector<std::string>{"post_id", "cascade_id"}) {
    throw std::runtime_error(fmt::format("{}: unexpected header", kCascades));
  }
  std::vector<std::vector<std::size_t>> cascades;
  while (reader.next(f, line)) {
    if (f.size() != 2) throw std::runtime_error(fmt::format("{}:{}: expected 2 fields", kCascades, line));
    const auto it = corpus.index.find(f[0]);
    if (it == corpus.index.end()) {
      throw std::runtime_error(fmt::format("{}:{}: unknown post '{}'", kCascades, line, f[0]));
    }
    const auto cid = to_integer<std::size_t>(f[1], kCascades);
    if (cid >= corpus.posts.size()) throw std::runtime_error(fmt::format("{}:{}: cascade id out of range", kCascades, line));
    if (cid >= cascades.size()) cascades.resize(cid + 1);
    cascades[cid].push_back(it->second);
  }
  for (auto& members : cascades) {
    if (members.empty()) throw std::runtime_error(fmt::format("{}: cascade ids are not contiguous", kCascades));
    std::sort(members.begin(), members.end());
  }
  return cascades;
}

std::vector<const PostRecord*> pointers(const Corpus& corpus, const std::vector<std::size_t>& members) {
  std::vector<const PostRecord*> out;
  out.reserve(members.size());
  for (std::size_t i : members) out.push_back(&corpus.posts[i]);
  return out;
}

const std::vector<std::string>& cascade_metric_header() {
  static const std::vector<std::string> kHeader = {
      "cascade_id", "root_id", "size", "depth", "mean_branch", "max_branch", "structural_virality",
      "time_to_first_repost_hr", "peak_repost_speed_hr", "lifespan_hr", "avg_repost_delay_hr",
      "num_subreddits", "total_upvotes", "text_entropy_bits", "image_entropy_bits", "misinfo",
      "genai", "label"};
  return kHeader;
}

struct CascadeRow {
  CascadeMetrics metrics;
  bool label = false;
};

std::vector<CascadeRow> load_cascade_metrics(const PipelineConfig& cfg) {
  const std::string text = read_artifact(cfg, kCascadeMetrics);
  DelimitedReader reader(text);
  std::vector<std::string> f;
  std::size_t line = 0;
  if (!reader.next(f, line) || f != cascade_metric_header()) {
    throw std::runtime_error(fmt::format("{}: unexpected header", kCascadeMetrics));
  }
  std::vector<CascadeRow> rows;
  while (reader.next(f, line)) {
    if (f.size() != cascade_metric_header().size()) {
      throw std::runtime_error(fmt::format("{}:{}: wrong field count", kCascadeMetrics, line));
    }
    CascadeRow r;
    auto& m = r.metrics;
    m.cascade_id = to_integer<std::size_t>(f[0], kCascadeMetrics);
    m.size = to_integer<std::size_t>(f[2], kCascadeMetrics);
    m.depth = to_integer<std::size_t>(f[3], kCascadeMetrics);
    m.mean_branch = to_double(f[4], kCascadeMetrics);
    m.max_branch = to_double(f[5], kCascadeMetrics);
    m.structural_virality = to_double(f[6], kCascadeMetrics);
    m.time_to_first_repost_hr = to_optional(f[7], kCascadeMetrics);
    m.peak_repost_speed_hr = to_optional(f[8], kCascadeMetrics);
    m.lifespan_hr = to_double(f[9], kCascadeMetrics);
    m.avg_repost_delay_hr = to_optional(f[10], kCascadeMetrics);
    m.num_subreddits = to_integer<std::size_t>(f[11], kCascadeMetrics);
    m.total_upvotes = to_integer<std::int64_t>(f[12], kCascadeMetrics);
    m.text_entropy_bits = to_double(f[13], kCascadeMetrics);
    m.image_entropy_bits = to_double(f[14], kCascadeMetrics);
    m.misinfo_cascade_flag = f[15] == "1";
    m.genai_cascade_flag = f[16] == "1";
    r.label = f[17] == "1";
    if (m.cascade_id != rows.size()) {
      throw std::runtime_error(fmt::format("{}:{}: cascade ids out of order", kCascadeMetrics, line));
    }
    rows.push_back(r);
  }
  return rows;
}

struct PostMetricRow {
  double vai = 0.0;
  bool label = false;
};

std::unordered_map<std::string, PostMetricRow> load_post_metrics(const PipelineConfig& cfg) {
  const std::string text = read_artifact(cfg, kPostMetrics);
  DelimitedReader reader(text);
  std::vector<std::string> f;
  std::size_t line = 0;
  reader.next(f, line);
  if (f.size() != 8 || f[0] != "id" || f[3] != "vai" || f[7] != "label") {
    throw std::runtime_error(fmt::format("{}: unexpected header", kPostMetrics));
  }
  std::unordered_map<std::string, PostMetricRow> rows;
  while (reader.next(f, line)) {
    if (f.size() != 8) throw std::runtime_error(fmt::format("{}:{}: wrong field count", kPostMetrics, line));
    rows[f[0]] = {to_double(f[3], kPostMetrics), f[7] == "1"};
  }
  return rows;
}

// ---- stages --------------------------------------------------------------------

void stage_ingest(const PipelineConfig& cfg) {
  if (cfg.inputs.empty()) throw std::runtime_error("no input files given");
  std::vector<PostRecord> records;
  ordered_json files = ordered_json::array();
  for (const auto& path : cfg.inputs) {
    if (!fs::exists(path)) throw std::runtime_error(fmt::format("input not found: {}", path.string()));
    ParseResult parsed;
    try {
      parsed = read_posts_file(path, cfg.format, cfg.strict, cfg.threads);
    } catch (const IngestError& e) {
      throw std::runtime_error(fmt::format("{}:{}: {}", path.string(), e.line(), e.what()));
    }
    ordered_json errors = ordered_json::array();
    for (const auto& e : parsed.errors) errors.push_back({{"line", e.line}, {"message", e.message}});
    files.push_back({{"path", path.string()},
                     {"records", parsed.records.size()},
                     {"errors", std::move(errors)}});
    records.insert(records.end(), std::make_move_iterator(parsed.records.begin()),
                   std::make_move_iterator(parsed.records.end()));
  }
  std::size_t nsfw_dropped = 0;
  if (cfg.drop_nsfw) {
    const std::size_t before = records.size();
    records = filter_nsfw(std::move(records));
    nsfw_dropped = before - records.size();
  }
  DedupeReport dedupe;
  records = validate_and_dedupe(std::move(records), &dedupe);

  write_with(cfg.output_dir / kPosts, [&](std::ostream& s) { write_json_lines(s, records); });
  ordered_json reasons = ordered_json::object();
  for (const auto& [k, v] : dedupe.invalid_reasons) reasons[k] = v;
  ordered_json report = {{"files", std::move(files)},
                         {"nsfw_dropped", nsfw_dropped},
                         {"input", dedupe.input},
                         {"kept", dedupe.kept},
                         {"duplicates", dedupe.duplicates},
                         {"invalid", dedupe.invalid},
                         {"invalid_reasons", std::move(reasons)}};
  write_text(cfg.output_dir / "ingest_report.json", report.dump(2) + "\n");
}

void stage_cluster(const PipelineConfig& cfg) {
  const Corpus corpus = load_posts(cfg);
  SimilarityConfig sim = cfg.similarity;
  sim.threads = cfg.threads;
  const CascadeSet set = build_cascades(corpus.posts, sim);
  write_with(cfg.output_dir / kCascades, [&](std::ostream& s) { write_assignments(s, set); });
  write_with(cfg.output_dir / "merge_log.csv", [&](std::ostream& s) { write_merge_log(s, set); });
  const ordered_json report = {{"posts", set.post_count()},
                               {"cascades", set.cascades.size()},
                               {"url_merges", set.report.url_merges},
                               {"crosspost_merges", set.report.crosspost_merges},
                               {"same_author_merges", set.report.same_author_merges},
                               {"dangling_parents", set.report.dangling_parents},
                               {"unreadable_thumbnails", set.report.unreadable_thumbnails}};
  write_text(cfg.output_dir / "cluster_report.json", report.dump(2) + "\n");
}

void stage_graph(const PipelineConfig& cfg) {
  const Corpus corpus = load_posts(cfg);
  const auto cascades = load_cascades(cfg, corpus);
  std::ostringstream out;
  out << "parent_id,child_id,cascade_id\n";
  for (std::size_t c = 0; c < cascades.size(); ++c) {
    const auto members = pointers(corpus, cascades[c]);
    write_edge_list(out, build_repost_graph(std::span<const PostRecord* const>(members)), c);
  }
  write_text(cfg.output_dir / kEdges, out.str());
}

std::vector<bool> post_labels(const PipelineConfig& cfg, const Corpus& corpus,
                              const std::vector<PostMetrics>& metrics) {
  std::vector<double> vai_values;
  vai_values.reserve(metrics.size());
  for (const auto& m : metrics) vai_values.push_back(m.vai);
  if (cfg.label_scope == LabelScope::kGlobal) return label_top_quantile(vai_values, cfg.label_fraction);
  std::vector<std::string> groups;
  groups.reserve(corpus.posts.size());
  for (const auto& p : corpus.posts) groups.push_back(p.subreddit);
  return label_top_quantile_by_group(vai_values, groups, cfg.label_fraction);
}

void stage_metrics(const PipelineConfig& cfg) {
  const Corpus corpus = load_posts(cfg);
  if (corpus.posts.empty()) throw std::runtime_error("no posts to measure");
  const auto cascades = load_cascades(cfg, corpus);

  std::vector<std::vector<std::pair<std::string, std::string>>> edges(cascades.size());
  {
    const std::string text = read_artifact(cfg, kEdges);
    DelimitedReader reader(text);
    std::vector<std::string> f;
    std::size_t line = 0;
    if (!reader.next(f, line) || f != std::vector<std::string>{"parent_id", "child_id", "cascade_id"}) {
      throw std::runtime_error(fmt::format("{}: unexpected header", kEdges));
    }
    while (reader.next(f, line)) {
      if (f.size() != 3) throw std::runtime_error(fmt::format("{}:{}: expected 3 fields", kEdges, line));
      const auto cid = to_integer<std::size_t>(f[2], kEdges);
      if (cid >= edges.size()) throw std::runtime_error(fmt::format("{}:{}: unknown cascade {}", kEdges, line, cid));
      edges[cid].emplace_back(std::move(f[0]), std::move(f[1]));
    }
  }

  std::vector<CascadeMetrics> summaries;
  summaries.reserve(cascades.size());
  std::vector<std::size_t> cascade_of(corpus.posts.size());
  for (std::size_t c = 0; c < cascades.size(); ++c) {
    const auto members = pointers(corpus, cascades[c]);
    std::vector<std::string> nodes;
    nodes.reserve(members.size());
    for (const auto* p : members) nodes.push_back(p->id);
    for (std::size_t i : cascades[c]) cascade_of[i] = c;
    const RepostGraph graph = RepostGraph::from_edges(std::move(nodes), edges[c]);
    summaries.push_back(cascade_summary(std::span<const PostRecord* const>(members), graph,
                                        cfg.window_hr, c));
  }

  std::vector<double> virality;
  virality.reserve(summaries.size());
  for (const auto& m : summaries) {
    virality.push_back(cfg.cascade_label == CascadeLabelSource::kSize ? static_cast<double>(m.size)
                                                                      : m.structural_virality);
  }
  const auto cascade_label = label_top_quantile(virality, cfg.label_fraction);

  std::int64_t reference = corpus.posts.back().created_utc;
  if (cfg.reference_utc) reference = *cfg.reference_utc;
  const auto post_rows = post_metrics(corpus.posts, reference, cfg.vai);
  const auto post_label = post_labels(cfg, corpus, post_rows);

  {
    std::ostringstream out;
    const auto& header = cascade_metric_header();
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (std::size_t c = 0; c < summaries.size(); ++c) {
      const auto& m = summaries[c];
      out << c << ',' << quote_field(corpus.posts[cascades[c].front()].id) << ',' << m.size << ','
          << m.depth << ',' << number(m.mean_branch) << ',' << number(m.max_branch) << ','
          << number(m.structural_virality) << ',' << number(m.time_to_first_repost_hr) << ','
          << number(m.peak_repost_speed_hr) << ',' << number(m.lifespan_hr) << ','
          << number(m.avg_repost_delay_hr) << ',' << m.num_subreddits << ',' << m.total_upvotes
          << ',' << number(m.text_entropy_bits) << ',' << number(m.image_entropy_bits) << ','
          << (m.misinfo_cascade_flag ? 1 : 0) << ',' << (m.genai_cascade_flag ? 1 : 0) << ','
          << (cascade_label[c] ? 1 : 0) << '\n';
    }
    write_text(cfg.output_dir / kCascadeMetrics, out.str());
  }
  {
    std::ostringstream out;
    out << "id,cascade_id,age_hours,vai,engagement_ratio,misinfo,genai,label\n";
    for (std::size_t i = 0; i < post_rows.size(); ++i) {
      const auto& p = corpus.posts[i];
      out << quote_field(post_rows[i].id) << ',' << cascade_of[i] << ','
          << number(post_rows[i].age_hours) << ',' << number(post_rows[i].vai) << ','
          << number(post_rows[i].engagement_ratio) << ',' << (p.misinfo_flag ? 1 : 0) << ','
          << (p.genai_flag ? 1 : 0) << ',' << (post_label[i] ? 1 : 0) << '\n';
    }
    write_text(cfg.output_dir / kPostMetrics, out.str());
  }

  std::vector<FlaggedRow> post_flagged;
  post_flagged.reserve(post_rows.size());
  for (std::size_t i = 0; i < post_rows.size(); ++i) {
    const auto& p = corpus.posts[i];
    post_flagged.push_back({p.misinfo_flag, p.genai_flag,
                            {post_rows[i].age_hours / 24.0, post_rows[i].age_hours,
                             static_cast<double>(p.score), static_cast<double>(p.total_comments),
                             post_rows[i].vai}});
  }
  std::vector<FlaggedRow> cascade_flagged;
  cascade_flagged.reserve(summaries.size());
  for (const auto& m : summaries) {
    cascade_flagged.push_back({m.misinfo_cascade_flag, m.genai_cascade_flag,
                               {m.mean_branch, m.max_branch, static_cast<double>(m.size),
                                static_cast<double>(m.depth), m.structural_virality,
                                m.time_to_first_repost_hr, m.peak_repost_speed_hr, m.lifespan_hr,
                                static_cast<double>(m.num_subreddits)}});
  }
  ReportBundle bundle;
  bundle.post_table = group_stats(post_table_sources(), post_flagged);
  bundle.cascade_table = group_stats(cascade_table_sources(), cascade_flagged);
  write_with(cfg.output_dir / "table_post.csv",
             [&](std::ostream& s) { write_group_table_csv(s, *bundle.post_table); });
  write_with(cfg.output_dir / "table_cascade.csv",
             [&](std::ostream& s) { write_group_table_csv(s, *bundle.cascade_table); });
  write_text(cfg.output_dir / "tables.md", render_markdown(bundle));
}

fs::path resolve_thumbnail(const PipelineConfig& cfg, const std::string& path) {
  fs::path p(path);
  if (p.is_relative() && !cfg.similarity.thumbnail_root.empty()) p = cfg.similarity.thumbnail_root / p;
  return p;
}

std::vector<std::string> extra_columns(const std::vector<PostRecord>& posts) {
  std::vector<std::string> names;
  for (const auto& p : posts) {
    for (const auto& [name, _] : p.extra) names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

void stage_features(const PipelineConfig& cfg) {
  const Corpus corpus = load_posts(cfg);
  const auto cascades = load_cascades(cfg, corpus);
  const auto post_rows = load_post_metrics(cfg);
  const auto cascade_rows = load_cascade_metrics(cfg);
  if (cascade_rows.size() != cascades.size()) {
    throw std::runtime_error(fmt::format("{} and {} disagree on cascade count", kCascades, kCascadeMetrics));
  }
  const std::vector<std::string> keywords = cfg.keywords.empty() ? default_clickbait_keywords() : cfg.keywords;
  const auto extras = extra_columns(corpus.posts);
  const std::size_t n = corpus.posts.size();

  std::vector<std::optional<ImageFeatures>> images(n);
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  auto work = [&](unsigned w) {
    for (std::size_t i = w; i < n; i += workers) {
      const auto& p = corpus.posts[i];
      if (!p.thumbnail_path) continue;
      try {
        images[i] = image_features(resolve_thumbnail(cfg, *p.thumbnail_path), cfg.ela_quality);
      } catch (const ImageError&) {
        // Unreadable thumbnails fall back to the image_missing indicator.
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  std::vector<FeatureVector> vectors;
  vectors.reserve(n);
  FeatureMatrix post_matrix(post_feature_names(extras));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = corpus.posts[i];
    const auto it = post_rows.find(p.id);
    if (it == post_rows.end()) throw std::runtime_error(fmt::format("{}: no row for post '{}'", kPostMetrics, p.id));
    DerivedFeatures derived{text_features(p.title, keywords), images[i]};
    vectors.push_back(assemble_post_features(p, derived, it->second.vai, extras));
    vectors.back().label = it->second.label;
    post_matrix.append(p.id, vectors.back());
  }
  write_with(cfg.output_dir / kFeaturesPost, [&](std::ostream& s) { write_feature_matrix(s, post_matrix); });

  for (const auto& mode_name : cfg.modes) {
    const CascadeMode mode = cascade_mode_from_name(mode_name);
    std::optional<FeatureMatrix> matrix;
    for (std::size_t c = 0; c < cascades.size(); ++c) {
      const auto members = pointers(corpus, cascades[c]);
      std::vector<FeatureVector> member_vectors;
      member_vectors.reserve(members.size());
      for (std::size_t i : cascades[c]) member_vectors.push_back(vectors[i]);
      FeatureVector v = assemble_cascade_features(members, member_vectors, cascade_rows[c].metrics, mode);
      v.label = cascade_rows[c].label;
      if (!matrix) matrix.emplace(v.names);
      matrix->append(fmt::format("{}", c), v);
    }
    if (!matrix) matrix.emplace(cascade_feature_names(mode, post_content_columns(extras)));
    write_with(cfg.output_dir / fmt::format("features_cascade_{}.csv", to_string(mode)),
               [&](std::ostream& s) { write_feature_matrix(s, *matrix); });
  }
}

FeatureMatrix post_content_matrix(const FeatureMatrix& full) {
  std::vector<std::string> extras;
  std::vector<std::string> registry;
  for (const auto& spec : post_feature_registry()) registry.push_back(spec.name);
  for (const auto& c : full.columns()) {
    if (std::find(registry.begin(), registry.end(), c) == registry.end() && c != "emb_missing" &&
        c != "obj_missing") {
      extras.push_back(c);
    }
  }
  const auto content = post_content_columns(extras);
  return full.select_columns(content);
}

bool trainable(const FeatureMatrix& m) {
  if (!m.labeled()) return false;
  std::size_t pos = 0;
  for (bool b : m.labels()) pos += b ? 1 : 0;
  return pos >= 2 && m.rows() - pos >= 2;
}

void stage_predict(const PipelineConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> requested;
  for (const auto& level : cfg.levels) {
    if (level != "post" && level != "cascade") throw std::runtime_error(fmt::format("unknown level '{}'", level));
    for (const auto& mode : cfg.modes) {
      cascade_mode_from_name(mode);
      if (level == "post" && mode != "content") continue;  // post level is content-only
      requested.emplace_back(level, mode);
    }
  }
  if (requested.empty()) throw std::runtime_error("no prediction cell matches the requested levels and modes");

  std::vector<FeatureMatrix> matrices;
  matrices.reserve(requested.size());
  for (const auto& [level, mode] : requested) {
    if (level == "post") {
      matrices.push_back(post_content_matrix(read_feature_matrix(read_artifact(cfg, kFeaturesPost))));
    } else {
      matrices.push_back(read_feature_matrix(read_artifact(cfg, fmt::format("features_cascade_{}.csv", mode))));
    }
  }

  if (cfg.export_matrix) {
    for (std::size_t i = 0; i < requested.size(); ++i) {
      fs::path target = *cfg.export_matrix;
      if (requested.size() > 1) {
        target.replace_filename(fmt::format("{}_{}_{}{}", target.stem().string(), requested[i].first,
                                            requested[i].second, target.extension().string()));
      }
      write_with(target, [&](std::ostream& s) { write_feature_matrix(s, matrices[i]); });
    }
  }

  std::vector<ExperimentCell> cells;
  std::vector<std::string> skipped;
  for (std::size_t i = 0; i < requested.size(); ++i) {
    if (trainable(matrices[i])) {
      cells.push_back({requested[i].first, requested[i].second, &matrices[i]});
    } else {
      skipped.push_back(fmt::format("{}/{}", requested[i].first, requested[i].second));
    }
  }
  GridOptions options = cfg.predict;
  options.seed = derive_seed(cfg.seed, "predict");
  options.train.seed = options.seed;
  const auto rows = run_experiment_grid(cells, options);

  std::string md = "# Prediction\n\n" + render_experiments(rows);
  for (const auto& s : skipped) md += fmt::format("\nSkipped {}: each class needs at least two rows.\n", s);
  write_text(cfg.output_dir / "predict_report.md", md);
  write_with(cfg.output_dir / "predict_report.csv", [&](std::ostream& s) { write_experiments_csv(s, rows); });
  write_with(cfg.output_dir / "attributions.csv", [&](std::ostream& s) { write_attributions_csv(s, rows); });
}

void stage_report(const PipelineConfig& cfg) {
  ReportBundle bundle;
  bundle.post_table = read_group_table_csv(read_artifact(cfg, "table_post.csv"));
  bundle.cascade_table = read_group_table_csv(read_artifact(cfg, "table_cascade.csv"));
  if (fs::exists(cfg.output_dir / "predict_report.csv")) {
    bundle.experiments = read_experiments_csv(read_artifact(cfg, "predict_report.csv"),
                                              read_artifact(cfg, "attributions.csv"));
  }
  if (cfg.report_markdown) emit_report(bundle, ReportFormat::kMarkdown, cfg.output_dir);
  if (cfg.report_plot_data) emit_report(bundle, ReportFormat::kPlotData, cfg.output_dir);
}

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kIngest: return "ingest";
    case Stage::kCluster: return "cluster";
    case Stage::kGraph: return "graph";
    case Stage::kMetrics: return "metrics";
    case Stage::kFeatures: return "features";
    case Stage::kPredict: return "predict";
    case Stage::kReport: return "report";
  }
  return "unknown";
}

Stage stage_from_name(std::string_view name) {
  for (Stage s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument(fmt::format("unknown stage '{}'", name));
}

std::set<Stage> parse_stage_list(std::string_view list) {
  std::set<Stage> out;
  for (const auto& name : split_list(list)) out.insert(stage_from_name(name));
  if (out.empty()) throw std::invalid_argument("empty stage list");
  return out;
}

int exit_code(Stage stage) { return 10 + static_cast<int>(stage); }

PipelineConfig apply_config(const KeyValueConfig& file, PipelineConfig c) {
  static const std::set<std::string, std::less<>> kKnown = {
      "input", "format", "strict", "drop_nsfw", "output_dir", "seed", "threads",
      "hash_threshold", "enable_title_fallback", "thumbnail_root", "vai_alpha", "vai_beta",
      "vai_tau", "window_hr", "label_fraction", "label_scope", "cascade_label", "reference_utc",
      "ela_quality", "keywords", "keywords_file", "test_fraction", "epochs", "learning_rate", "l2",
      "permutation_repeats", "max_shapley_features", "levels", "modes", "export_matrix",
      "report_markdown", "report_plot_data", "stages"};
  for (const auto& [key, _] : file.entries()) {
    if (!kKnown.contains(key)) throw std::invalid_argument(fmt::format("unknown config key '{}'", key));
  }
  if (auto v = file.get_string("input")) {
    c.inputs.clear();
    for (const auto& p : split_list(*v)) c.inputs.emplace_back(p);
  }
  if (auto v = file.get_string("format")) {
    c.format = format_from_name(*v);
    if (!c.format) throw std::invalid_argument(fmt::format("unknown input format '{}'", *v));
  }
  if (auto v = file.get_bool("strict")) c.strict = *v;
  if (auto v = file.get_bool("drop_nsfw")) c.drop_nsfw = *v;
  if (auto v = file.get_string("output_dir")) c.output_dir = *v;
  if (auto v = file.get_int("seed")) c.seed = static_cast<std::uint64_t>(*v);
  if (auto v = file.get_int("threads")) {
    if (*v < 1) throw std::invalid_argument("threads must be at least 1");
    c.threads = static_cast<unsigned>(*v);
  }
  if (auto v = file.get_int("hash_threshold")) c.similarity.hash_threshold = static_cast<int>(*v);
  if (auto v = file.get_bool("enable_title_fallback")) c.similarity.enable_title_fallback = *v;
  if (auto v = file.get_string("thumbnail_root")) c.similarity.thumbnail_root = *v;
  if (auto v = file.get_double("vai_alpha")) c.vai.alpha = *v;
  if (auto v = file.get_double("vai_beta")) c.vai.beta = *v;
  if (auto v = file.get_double("vai_tau")) c.vai.tau = *v;
  if (auto v = file.get_double("window_hr")) c.window_hr = *v;
  if (auto v = file.get_double("label_fraction")) c.label_fraction = *v;
  if (auto v = file.get_string("label_scope")) {
    if (*v == "global") c.label_scope = LabelScope::kGlobal;
    else if (*v == "subreddit") c.label_scope = LabelScope::kSubreddit;
    else throw std::invalid_argument(fmt::format("label_scope must be global or subreddit, got '{}'", *v));
  }
  if (auto v = file.get_string("cascade_label")) {
    if (*v == "structural_virality") c.cascade_label = CascadeLabelSource::kStructuralVirality;
    else if (*v == "size") c.cascade_label = CascadeLabelSource::kSize;
    else throw std::invalid_argument(fmt::format("cascade_label must be structural_virality or size, got '{}'", *v));
  }
  if (auto v = file.get_int("reference_utc")) c.reference_utc = *v;
  if (auto v = file.get_int("ela_quality")) c.ela_quality = static_cast<int>(*v);
  if (auto v = file.get_string("keywords")) c.keywords = split_list(*v);
  if (auto v = file.get_string("keywords_file")) {
    c.keywords.clear();
    std::istringstream in(read_file(*v));
    for (std::string line; std::getline(in, line);) {
      for (auto& k : split_list(line)) c.keywords.push_back(std::move(k));
    }
  }
  if (auto v = file.get_double("test_fraction")) c.predict.test_fraction = *v;
  if (auto v = file.get_int("epochs")) c.predict.train.epochs = static_cast<int>(*v);
  if (auto v = file.get_double("learning_rate")) c.predict.train.learning_rate = *v;
  if (auto v = file.get_double("l2")) c.predict.train.l2 = *v;
  if (auto v = file.get_int("permutation_repeats")) c.predict.permutation_repeats = static_cast<int>(*v);
  if (auto v = file.get_int("max_shapley_features")) c.predict.max_shapley_features = static_cast<std::size_t>(*v);
  if (auto v = file.get_string("levels")) c.levels = split_list(*v);
  if (auto v = file.get_string("modes")) c.modes = split_list(*v);
  if (auto v = file.get_string("export_matrix")) c.export_matrix = fs::path(*v);
  if (auto v = file.get_bool("report_markdown")) c.report_markdown = *v;
  if (auto v = file.get_bool("report_plot_data")) c.report_plot_data = *v;
  if (auto v = file.get_string("stages")) c.stages = parse_stage_list(*v);
  return c;
}

void validate(const PipelineConfig& c) {
  if (!(c.label_fraction > 0.0 && c.label_fraction < 1.0)) {
    throw std::invalid_argument("label_fraction must lie in (0, 1)");
  }
  if (!(c.predict.test_fraction > 0.0 && c.predict.test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  }
  if (!(c.window_hr > 0.0)) throw std::invalid_argument("window_hr must be positive");
  if (!(c.vai.tau > 0.0) || c.vai.alpha < 0.0 || c.vai.beta < 0.0) {
    throw std::invalid_argument("VAI parameters need tau > 0 and non-negative alpha, beta");
  }
  if (c.ela_quality < 1 || c.ela_quality > 100) throw std::invalid_argument("ela_quality must lie in [1, 100]");
  if (c.similarity.hash_threshold < 0 || c.similarity.hash_threshold > 64) {
    throw std::invalid_argument("hash_threshold must lie in [0, 64]");
  }
  if (c.threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (c.predict.permutation_repeats < 1) throw std::invalid_argument("permutation_repeats must be at least 1");
  if (c.predict.train.epochs < 1 || !(c.predict.train.learning_rate > 0.0) || c.predict.train.l2 < 0.0) {
    throw std::invalid_argument("training needs epochs >= 1, learning_rate > 0, l2 >= 0");
  }
  for (const auto& m : c.modes) cascade_mode_from_name(m);
  for (const auto& l : c.levels) {
    if (l != "post" && l != "cascade") throw std::invalid_argument(fmt::format("unknown level '{}'", l));
  }
  if (c.output_dir.empty()) throw std::invalid_argument("output_dir is empty");
}

void run_stage(Stage stage, const PipelineConfig& config) {
  try {
    switch (stage) {
      case Stage::kIngest: stage_ingest(config); break;
      case Stage::kCluster: stage_cluster(config); break;
      case Stage::kGraph: stage_graph(config); break;
      case Stage::kMetrics: stage_metrics(config); break;
      case Stage::kFeatures: stage_features(config); break;
      case Stage::kPredict: stage_predict(config); break;
      case Stage::kReport: stage_report(config); break;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

void write_manifest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() != kManifest) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  ordered_json artifacts = ordered_json::array();
  for (const auto& f : files) {
    const std::string content = read_file(f);
    artifacts.push_back({{"file", f.filename().string()},
                         {"bytes", content.size()},
                         {"sha256", sha256_hex(content)}});
  }
  const ordered_json manifest = {{"artifacts", std::move(artifacts)}};
  write_text(dir / kManifest, manifest.dump(2) + "\n");
}

int run_pipeline(const PipelineConfig& config, std::ostream& diag) {
  try {
    validate(config);
    fs::create_directories(config.output_dir);
  } catch (const std::exception& e) {
    diag << "[config] " << e.what() << '\n';
    return kExitUsage;
  }
  for (Stage stage : kAllStages) {
    if (!config.stages.contains(stage)) continue;
    try {
      run_stage(stage, config);
    } catch (const StageError& e) {
      diag << '[' << to_string(e.stage()) << "] " << e.what() << '\n';
      return exit_code(e.stage());
    }
  }
  try {
    write_manifest(config.output_dir);
  } catch (const std::exception& e) {
    diag << "[manifest] " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace cascade

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/cluster.h"
#include "cascade/config.h"
#include "cascade/ingest.h"
#include "cascade/metrics.h"
#include "cascade/predict.h"

namespace cascade {

enum class Stage { kIngest, kCluster, kGraph, kMetrics, kFeatures, kPredict, kReport };

inline constexpr Stage kAllStages[] = {Stage::kIngest,   Stage::kCluster,  Stage::kGraph,
                                       Stage::kMetrics,  Stage::kFeatures, Stage::kPredict,
                                       Stage::kReport};

std::string_view to_string(Stage stage);
Stage stage_from_name(std::string_view name);
// Comma-separated stage names; throws std::invalid_argument on unknown names.
std::set<Stage> parse_stage_list(std::string_view list);

// Process exit status for a failure in `stage`.
int exit_code(Stage stage);
inline constexpr int kExitUsage = 2;

class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& what)
      : std::runtime_error(what), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

enum class LabelScope { kGlobal, kSubreddit };
enum class CascadeLabelSource { kStructuralVirality, kSize };

struct PipelineConfig {
  std::vector<std::filesystem::path> inputs;
  std::optional<InputFormat> format;
  bool strict = false;
  bool drop_nsfw = false;
  std::filesystem::path output_dir = "cascade_out";
  std::uint64_t seed = 0;
  unsigned threads = 1;

  SimilarityConfig similarity;
  VaiParams vai;
  double window_hr = 24.0;
  double label_fraction = 0.2;
  LabelScope label_scope = LabelScope::kGlobal;
  CascadeLabelSource cascade_label = CascadeLabelSource::kStructuralVirality;
  // Age reference for VAI; defaults to the newest post.
  std::optional<std::int64_t> reference_utc;

  int ela_quality = 90;
  std::vector<std::string> keywords;  // empty means the default list

  GridOptions predict;
  std::vector<std::string> levels = {"post", "cascade"};
  std::vector<std::string> modes = {"content", "context", "combined"};
  std::optional<std::filesystem::path> export_matrix;

  bool report_markdown = true;
  bool report_plot_data = true;

  std::set<Stage> stages{std::begin(kAllStages), std::end(kAllStages)};
};

// Applies the recognised keys of a key-value file on top of `base`. Throws
// std::invalid_argument on unknown keys or bad values.
PipelineConfig apply_config(const KeyValueConfig& file, PipelineConfig base = {});

// Throws std::invalid_argument when the config is unusable.
void validate(const PipelineConfig& config);

// Runs one stage. Reads only artifacts in the output directory (plus the
// inputs, for ingest). Throws StageError.
void run_stage(Stage stage, const PipelineConfig& config);

// Writes manifest.json listing every other file in the output directory with
// its SHA-256.
void write_manifest(const std::filesystem::path& dir);

std::string sha256_hex(std::string_view data);

// Runs the selected stages in order and writes the manifest. Returns the
// process exit status; diagnostics go to `diag`.
int run_pipeline(const PipelineConfig& config, std::ostream& diag);

}  // namespace cascade

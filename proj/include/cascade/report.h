#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/metrics.h"
#include "cascade/predict.h"

namespace cascade {

enum class Stat { kMean, kStd };

struct DisplayColumn {
  std::string header;
  std::string source;  // GroupTable column
  Stat stat = Stat::kMean;
};

// Source columns and display layout of the post-level flag table.
const std::vector<std::string>& post_table_sources();
const std::vector<DisplayColumn>& post_table_layout();
// Same for the cascade-level flag table.
const std::vector<std::string>& cascade_table_sources();
const std::vector<DisplayColumn>& cascade_table_layout();

inline constexpr std::string_view kNullMarker = "NA";

// "| Misinformation | GenAI | ..." with one body row per flag group; empty
// groups print the null marker in every statistic.
std::string render_group_table(const GroupTable& table, std::span<const DisplayColumn> layout);

// Machine-readable copy: misinfo,genai,rows then <col>_count,<col>_mean,<col>_std
// per source column. Values round-trip exactly.
void write_group_table_csv(std::ostream& out, const GroupTable& table);
GroupTable read_group_table_csv(std::string_view text);

// level,mode,train_rows,test_rows,features,accuracy,macro_f1,auc,attribution_method
void write_experiments_csv(std::ostream& out, std::span<const ExperimentRow> rows);
// level,mode,feature,value (every attribution, in row order).
void write_attributions_csv(std::ostream& out, std::span<const ExperimentRow> rows);
// Inverse of the two writers above.
std::vector<ExperimentRow> read_experiments_csv(std::string_view experiments,
                                                std::string_view attributions);

std::string render_experiments(std::span<const ExperimentRow> rows, std::size_t top_k = 5);

// feature,mean_attribution; sorted descending, at most top_k rows.
void write_plot_data(std::ostream& out, std::span<const Attribution> attributions,
                     std::size_t top_k = 5);

struct ReportBundle {
  std::optional<GroupTable> post_table;
  std::optional<GroupTable> cascade_table;
  std::vector<ExperimentRow> experiments;
};

enum class ReportFormat { kMarkdown, kMachineReadable, kPlotData };

std::string render_markdown(const ReportBundle& bundle);

// Writes the bundle in one format under `dir` and returns the files written,
// sorted by name:
//   markdown          report.md
//   machine-readable  table_post.csv, table_cascade.csv, predict_report.csv, attributions.csv
//   plot-data         top5_<level>_<mode>.csv per experiment row
std::vector<std::filesystem::path> emit_report(const ReportBundle& bundle, ReportFormat format,
                                               const std::filesystem::path& dir);

}  // namespace cascade

#include "cascade/report.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "cascade/ingest.h"

namespace cascade {

namespace {

std::string number(double v) { return fmt::format("{}", v); }

std::string number(const std::optional<double>& v) { return v ? number(*v) : std::string(); }

double parse_double(const std::string& s) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(fmt::format("report: '{}' is not a number", s));
  }
  return out;
}

std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

std::size_t parse_size(const std::string& s) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(fmt::format("report: '{}' is not a count", s));
  }
  return out;
}

bool parse_flag(const std::string& s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw std::invalid_argument(fmt::format("report: '{}' is not a flag", s));
}

std::string yes_no(bool b) { return b ? "True" : "False"; }

std::vector<Attribution> top_attributions(std::span<const Attribution> attributions,
                                          std::size_t top_k) {
  std::vector<Attribution> sorted(attributions.begin(), attributions.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Attribution& a, const Attribution& b) { return a.value > b.value; });
  if (sorted.size() > top_k) sorted.resize(top_k);
  return sorted;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << content;
}

}  // namespace

const std::vector<std::string>& post_table_sources() {
  static const std::vector<std::string> kSources = {"age_days", "age_hours", "score",
                                                    "total_comments", "vai"};
  return kSources;
}

const std::vector<DisplayColumn>& post_table_layout() {
  static const std::vector<DisplayColumn> kLayout = {
      {"Mean Age Days", "age_days", Stat::kMean},
      {"Std Age Hours", "age_hours", Stat::kStd},
      {"Mean Score", "score", Stat::kMean},
      {"Std Score", "score", Stat::kStd},
      {"Mean Total Comments", "total_comments", Stat::kMean},
      {"Std Total Comments", "total_comments", Stat::kStd},
      {"Mean VAI", "vai", Stat::kMean},
      {"Std VAI", "vai", Stat::kStd},
  };
  return kLayout;
}

const std::vector<std::string>& cascade_table_sources() {
  static const std::vector<std::string> kSources = {
      "mean_branch", "max_branch",          "size",        "depth",         "structural_virality",
      "time_to_first_repost_hr", "peak_repost_speed_hr", "lifespan_hr", "num_subreddits"};
  return kSources;
}

const std::vector<DisplayColumn>& cascade_table_layout() {
  static const std::vector<DisplayColumn> kLayout = {
      {"Mean Branch", "mean_branch", Stat::kMean},
      {"Max Branch", "max_branch", Stat::kMean},
      {"Cascade Size", "size", Stat::kMean},
      {"Cascade Depth", "depth", Stat::kMean},
      {"Structural Virality", "structural_virality", Stat::kMean},
      {"Time to First Repost (hr)", "time_to_first_repost_hr", Stat::kMean},
      {"Peak Repost Speed (hr)", "peak_repost_speed_hr", Stat::kMean},
      {"Lifespan (hr)", "lifespan_hr", Stat::kMean},
      {"# Subreddits", "num_subreddits", Stat::kMean},
  };
  return kLayout;
}

std::string render_group_table(const GroupTable& table, std::span<const DisplayColumn> layout) {
  std::vector<std::size_t> index;
  for (const auto& col : layout) {
    const auto it = std::find(table.columns.begin(), table.columns.end(), col.source);
    if (it == table.columns.end()) {
      throw std::invalid_argument(fmt::format("report: table has no column '{}'", col.source));
    }
    index.push_back(static_cast<std::size_t>(it - table.columns.begin()));
  }
  std::string out = "| Misinformation | GenAI |";
  std::string rule = "|---|---|";
  for (const auto& col : layout) {
    out += fmt::format(" {} |", col.header);
    rule += "---|";
  }
  out += '\n' + rule + '\n';
  for (const auto& row : table.rows) {
    out += fmt::format("| {} | {} |", yes_no(row.misinfo), yes_no(row.genai));
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const GroupCell& cell = row.cells[index[i]];
      const auto& v = layout[i].stat == Stat::kMean ? cell.mean : cell.stddev;
      out += v ? fmt::format(" {:.2f} |", *v) : fmt::format(" {} |", kNullMarker);
    }
    out += '\n';
  }
  return out;
}

void write_group_table_csv(std::ostream& out, const GroupTable& table) {
  out << "misinfo,genai,rows";
  for (const auto& c : table.columns) out << ',' << c << "_count," << c << "_mean," << c << "_std";
  out << '\n';
  for (const auto& row : table.rows) {
    out << (row.misinfo ? 1 : 0) << ',' << (row.genai ? 1 : 0) << ',' << row.rows;
    for (const auto& cell : row.cells) {
      out << ',' << cell.count << ',' << number(cell.mean) << ',' << number(cell.stddev);
    }
    out << '\n';
  }
}

GroupTable read_group_table_csv(std::string_view text) {
  DelimitedReader reader(text);
  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!reader.next(fields, line) || fields.size() < 3 || (fields.size() - 3) % 3 != 0) {
    throw std::invalid_argument("report: malformed group table header");
  }
  GroupTable table;
  for (std::size_t i = 3; i < fields.size(); i += 3) {
    const std::string& h = fields[i];
    if (h.size() < 6 || h.substr(h.size() - 6) != "_count") {
      throw std::invalid_argument(fmt::format("report: unexpected header '{}'", h));
    }
    table.columns.push_back(h.substr(0, h.size() - 6));
  }
  const std::size_t width = fields.size();
  std::size_t r = 0;
  while (reader.next(fields, line)) {
    if (fields.size() != width || r >= table.rows.size()) {
      throw std::invalid_argument(fmt::format("report: malformed group table row at line {}", line));
    }
    GroupRow& row = table.rows[r++];
    row.misinfo = parse_flag(fields[0]);
    row.genai = parse_flag(fields[1]);
    row.rows = parse_size(fields[2]);
    for (std::size_t i = 3; i < width; i += 3) {
      row.cells.push_back({parse_size(fields[i]), parse_optional(fields[i + 1]),
                           parse_optional(fields[i + 2])});
    }
  }
  if (r != table.rows.size()) throw std::invalid_argument("report: group table needs 4 rows");
  return table;
}

void write_experiments_csv(std::ostream& out, std::span<const ExperimentRow> rows) {
  out << "level,mode,train_rows,test_rows,features,accuracy,macro_f1,auc,attribution_method\n";
  for (const auto& r : rows) {
    out << r.level << ',' << r.mode << ',' << r.train_rows << ',' << r.test_rows << ','
        << r.features << ',' << number(r.accuracy) << ',' << number(r.macro_f1) << ','
        << number(r.auc) << ',' << r.attribution_method << '\n';
  }
}

void write_attributions_csv(std::ostream& out, std::span<const ExperimentRow> rows) {
  out << "level,mode,feature,value\n";
  for (const auto& r : rows) {
    for (const auto& a : r.attributions) {
      out << r.level << ',' << r.mode << ',' << quote_field(a.feature) << ',' << number(a.value)
          << '\n';
    }
  }
}

std::vector<ExperimentRow> read_experiments_csv(std::string_view experiments,
                                                std::string_view attributions) {
  std::vector<ExperimentRow> rows;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<std::string> f;
  std::size_t line = 0;
  DelimitedReader er(experiments);
  if (!er.next(f, line) || f.size() != 9) throw std::invalid_argument("report: malformed experiment header");
  while (er.next(f, line)) {
    if (f.size() != 9) throw std::invalid_argument(fmt::format("report: bad experiment row at line {}", line));
    ExperimentRow r;
    r.level = f[0];
    r.mode = f[1];
    r.train_rows = parse_size(f[2]);
    r.test_rows = parse_size(f[3]);
    r.features = parse_size(f[4]);
    r.accuracy = parse_double(f[5]);
    r.macro_f1 = parse_double(f[6]);
    r.auc = parse_double(f[7]);
    r.attribution_method = f[8];
    index[{r.level, r.mode}] = rows.size();
    rows.push_back(std::move(r));
  }
  DelimitedReader ar(attributions);
  if (!ar.next(f, line) || f.size() != 4) throw std::invalid_argument("report: malformed attribution header");
  while (ar.next(f, line)) {
    if (f.size() != 4) throw std::invalid_argument(fmt::format("report: bad attribution row at line {}", line));
    const auto it = index.find({f[0], f[1]});
    if (it == index.end()) {
      throw std::invalid_argument(fmt::format("report: attribution for unknown cell {}/{}", f[0], f[1]));
    }
    rows[it->second].attributions.push_back({f[2], parse_double(f[3])});
  }
  return rows;
}

std::string render_experiments(std::span<const ExperimentRow> rows, std::size_t top_k) {
  std::string out =
      "| Level | Mode | Train | Test | Features | Accuracy | Macro-F1 | AUC |\n"
      "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out += fmt::format("| {} | {} | {} | {} | {} | {:.3f} | {:.3f} | {:.3f} |\n", r.level, r.mode,
                       r.train_rows, r.test_rows, r.features, r.accuracy, r.macro_f1, r.auc);
  }
  for (const auto& r : rows) {
    const std::string method =
        r.attribution_method == "shapley" ? "mean |Shapley value|" : "mean AUC drop under permutation";
    out += fmt::format("\nTop {} features, {} / {} ({}):\n\n| Feature | Attribution |\n|---|---|\n",
                       top_k, r.level, r.mode, method);
    for (const auto& a : top_attributions(r.attributions, top_k)) {
      out += fmt::format("| {} | {:.4f} |\n", a.feature, a.value);
    }
  }
  return out;
}

void write_plot_data(std::ostream& out, std::span<const Attribution> attributions,
                     std::size_t top_k) {
  out << "feature,mean_attribution\n";
  for (const auto& a : top_attributions(attributions, top_k)) {
    out << quote_field(a.feature) << ',' << number(a.value) << '\n';
  }
}

std::string render_markdown(const ReportBundle& bundle) {
  std::string out = "# Cascade report\n";
  if (bundle.post_table) {
    out += "\n## Posts by flag group\n\n";
    out += render_group_table(*bundle.post_table, post_table_layout());
  }
  if (bundle.cascade_table) {
    out += "\n## Cascades by flag group\n\n";
    out += render_group_table(*bundle.cascade_table, cascade_table_layout());
  }
  if (!bundle.experiments.empty()) {
    out += "\n## Prediction\n\n";
    out += render_experiments(bundle.experiments);
  }
  return out;
}

std::vector<std::filesystem::path> emit_report(const ReportBundle& bundle, ReportFormat format,
                                               const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    written.push_back(dir / name);
  };
  switch (format) {
    case ReportFormat::kMarkdown:
      emit("report.md", render_markdown(bundle));
      break;
    case ReportFormat::kMachineReadable: {
      if (bundle.post_table) {
        std::ostringstream s;
        write_group_table_csv(s, *bundle.post_table);
        emit("table_post.csv", s.str());
      }
      if (bundle.cascade_table) {
        std::ostringstream s;
        write_group_table_csv(s, *bundle.cascade_table);
        emit("table_cascade.csv", s.str());
      }
      if (!bundle.experiments.empty()) {
        std::ostringstream e;
        std::ostringstream a;
        write_experiments_csv(e, bundle.experiments);
        write_attributions_csv(a, bundle.experiments);
        emit("predict_report.csv", e.str());
        emit("attributions.csv", a.str());
      }
      break;
    }
    case ReportFormat::kPlotData:
      for (const auto& r : bundle.experiments) {
        std::ostringstream s;
        write_plot_data(s, r.attributions);
        emit(fmt::format("top5_{}_{}.csv", r.level, r.mode), s.str());
      }
      break;
  }
  std::sort(written.begin(), written.end());
  return written;
}

}  // namespace cascade

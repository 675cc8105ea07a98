#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <fmt/format.h>

#include "cascade/config.h"
#include "cascade/report.h"

using namespace cascade;
namespace fs = std::filesystem;

namespace {

std::size_t count_lines(const std::string& s, std::string_view prefix) {
  std::istringstream in(s);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.starts_with(prefix)) ++n;
  }
  return n;
}

GroupTable post_table_without_true_true() {
  std::vector<FlaggedRow> rows;
  for (int i = 0; i < 6; ++i) {
    const bool m = i % 3 == 1;
    const bool g = i % 3 == 2;
    rows.push_back({m, g, {i * 1.0, i * 24.0, i * 10.0, i * 2.0, i * 0.5}});
  }
  return group_stats(post_table_sources(), rows);
}

ExperimentRow experiment(std::string level, std::string mode, std::size_t features) {
  ExperimentRow r{std::move(level), std::move(mode), 80, 20, features, 0.9, 0.85, 0.93, "shapley", {}};
  for (std::size_t i = 0; i < features; ++i) {
    r.attributions.push_back({fmt::format("f{:02}", i), 1.0 / static_cast<double>(i + 1)});
  }
  return r;
}

}  // namespace

TEST_CASE("group tables keep the exact column sets") {
  std::vector<std::string> headers;
  for (const auto& c : post_table_layout()) headers.push_back(c.header);
  CHECK(headers == std::vector<std::string>{"Mean Age Days", "Std Age Hours", "Mean Score", "Std Score",
                                            "Mean Total Comments", "Std Total Comments", "Mean VAI",
                                            "Std VAI"});
  headers.clear();
  for (const auto& c : cascade_table_layout()) headers.push_back(c.header);
  CHECK(headers == std::vector<std::string>{"Mean Branch", "Max Branch", "Cascade Size", "Cascade Depth",
                                            "Structural Virality", "Time to First Repost (hr)",
                                            "Peak Repost Speed (hr)", "Lifespan (hr)", "# Subreddits"});
}

TEST_CASE("four flag groups give four body rows with null markers for empty groups") {
  const auto table = post_table_without_true_true();
  const auto md = render_group_table(table, post_table_layout());
  CHECK(count_lines(md, "| True |") + count_lines(md, "| False |") == 4);
  CHECK(md.find("| True | True | NA | NA | NA | NA | NA | NA | NA | NA |") != std::string::npos);
  CHECK(md.find("| False | False | 1.50 |") != std::string::npos);
}

TEST_CASE("machine-readable tables round-trip exactly") {
  const auto table = post_table_without_true_true();
  std::ostringstream out;
  write_group_table_csv(out, table);
  const auto back = read_group_table_csv(out.str());
  CHECK(back.columns == table.columns);
  for (std::size_t g = 0; g < 4; ++g) {
    CHECK(back.rows[g].rows == table.rows[g].rows);
    CHECK(back.rows[g].misinfo == table.rows[g].misinfo);
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      CHECK(back.rows[g].cells[c].count == table.rows[g].cells[c].count);
      CHECK(back.rows[g].cells[c].mean == table.rows[g].cells[c].mean);
      CHECK(back.rows[g].cells[c].stddev == table.rows[g].cells[c].stddev);
    }
  }
  CHECK_THROWS_AS(read_group_table_csv("nope\n"), std::invalid_argument);
}

TEST_CASE("plot data keeps the top five") {
  const auto r = experiment("cascade", "combined", 12);
  std::ostringstream out;
  write_plot_data(out, r.attributions);
  const std::string s = out.str();
  CHECK(s.starts_with("feature,mean_attribution\n"));
  CHECK(count_lines(s, "f") == 6);  // header plus five rows
  CHECK(s.find("f00,1\n") != std::string::npos);
  CHECK(s.find("f05") == std::string::npos);

  std::vector<Attribution> unsorted = {{"b", 0.1}, {"a", 0.7}, {"c", 0.3}};
  std::ostringstream small;
  write_plot_data(small, unsorted);
  CHECK(small.str() == "feature,mean_attribution\na,0.7\nc,0.3\nb,0.1\n");
}

TEST_CASE("experiment rows round-trip") {
  const std::vector<ExperimentRow> rows = {experiment("post", "content", 3), experiment("cascade", "context", 7)};
  std::ostringstream e;
  std::ostringstream a;
  write_experiments_csv(e, rows);
  write_attributions_csv(a, rows);
  const auto back = read_experiments_csv(e.str(), a.str());
  REQUIRE(back.size() == 2);
  CHECK(back[1].mode == "context");
  CHECK(back[1].auc == rows[1].auc);
  REQUIRE(back[1].attributions.size() == 7);
  CHECK(back[1].attributions[6].value == rows[1].attributions[6].value);
  const auto md = render_experiments(rows);
  CHECK(md.find("cascade") != std::string::npos);
}

TEST_CASE("emit_report writes every format") {
  const fs::path dir = fs::temp_directory_path() / "cascade_report_emit";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ReportBundle bundle;
  bundle.post_table = post_table_without_true_true();
  bundle.experiments = {experiment("post", "content", 12), experiment("cascade", "combined", 4)};
  const auto md = emit_report(bundle, ReportFormat::kMarkdown, dir);
  CHECK(md == std::vector<fs::path>{dir / "report.md"});
  const auto csv = emit_report(bundle, ReportFormat::kMachineReadable, dir);
  CHECK(csv == std::vector<fs::path>{dir / "attributions.csv", dir / "predict_report.csv", dir / "table_post.csv"});
  const auto plots = emit_report(bundle, ReportFormat::kPlotData, dir);
  CHECK(plots == std::vector<fs::path>{dir / "top5_cascade_combined.csv", dir / "top5_post_content.csv"});
  fs::remove_all(dir);
}

TEST_CASE("key-value config parsing") {
  const auto kv = KeyValueConfig::parse("# comment\nseed = 7\n\nname=  a b  \nflag = yes\nseed = 9\n");
  CHECK(kv.get_int("seed") == 9);
  CHECK(kv.get_string("name") == "a b");
  CHECK(kv.get_bool("flag") == true);
  CHECK_FALSE(kv.get_string("missing"));
  CHECK_THROWS_AS(kv.get_double("name"), std::invalid_argument);
  CHECK_THROWS_AS(KeyValueConfig::parse("just words\n"), std::invalid_argument);
}

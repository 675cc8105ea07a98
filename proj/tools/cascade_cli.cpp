#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cascade/config.h"
#include "cascade/ingest.h"
#include "cascade/pipeline.h"
#include "cascade/random.h"
#include "cascade/synth.h"

namespace fs = std::filesystem;
using namespace cascade;

namespace {

// CLI values override the config file only when given on the command line.
class Overrides {
 public:
  template <typename T, typename Fn>
  void option(CLI::App* app, const std::string& name, const std::string& desc, Fn setter) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, desc);
    items_.push_back({opt, [value, setter](PipelineConfig& c) { setter(c, *value); }});
  }

  template <typename Fn>
  void flag(CLI::App* app, const std::string& name, const std::string& desc, Fn setter) {
    CLI::Option* opt = app->add_flag(name, desc);
    items_.push_back({opt, [setter](PipelineConfig& c) { setter(c); }});
  }

  void apply(PipelineConfig& c) const {
    for (const auto& [opt, fn] : items_) {
      if (opt->count() > 0) fn(c);
    }
  }

 private:
  std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> items_;
};

std::vector<std::string> split_commas(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::string cur;
    for (char ch : item) {
      if (ch == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

void ingest_options(CLI::App* app, Overrides& ov) {
  ov.option<std::vector<std::string>>(app, "--input", "Input record files", [](PipelineConfig& c, const auto& v) {
    c.inputs.assign(v.begin(), v.end());
  });
  ov.option<std::string>(app, "--format", "jsonl or csv (default: from extension)", [](PipelineConfig& c, const auto& v) {
    c.format = format_from_name(v);
    if (!c.format) throw std::invalid_argument(fmt::format("unknown input format '{}'", v));
  });
  ov.flag(app, "--strict", "Abort on the first malformed record", [](PipelineConfig& c) { c.strict = true; });
  ov.flag(app, "--drop-nsfw", "Drop records flagged nsfw", [](PipelineConfig& c) { c.drop_nsfw = true; });
}

void cluster_options(CLI::App* app, Overrides& ov) {
  ov.option<int>(app, "--hash-threshold", "Max Hamming distance between thumbnail hashes",
                 [](PipelineConfig& c, int v) { c.similarity.hash_threshold = v; });
  ov.flag(app, "--no-title-fallback", "Disable the title match for posts without images",
          [](PipelineConfig& c) { c.similarity.enable_title_fallback = false; });
}

void thumbnail_option(CLI::App* app, Overrides& ov) {
  ov.option<std::string>(app, "--thumbnail-root", "Directory for relative thumbnail paths",
                         [](PipelineConfig& c, const auto& v) { c.similarity.thumbnail_root = v; });
}

void metrics_options(CLI::App* app, Overrides& ov) {
  ov.option<double>(app, "--window-hr", "Peak repost speed window (hours)",
                    [](PipelineConfig& c, double v) { c.window_hr = v; });
  ov.option<double>(app, "--label-fraction", "Top fraction labeled viral",
                    [](PipelineConfig& c, double v) { c.label_fraction = v; });
  ov.option<std::string>(app, "--label-scope", "global or subreddit", [](PipelineConfig& c, const auto& v) {
    if (v == "global") c.label_scope = LabelScope::kGlobal;
    else if (v == "subreddit") c.label_scope = LabelScope::kSubreddit;
    else throw std::invalid_argument(fmt::format("unknown label scope '{}'", v));
  });
  ov.option<std::int64_t>(app, "--reference-utc", "Age reference time (default: newest post)",
                          [](PipelineConfig& c, std::int64_t v) { c.reference_utc = v; });
}

void mode_option(CLI::App* app, Overrides& ov) {
  ov.option<std::vector<std::string>>(app, "--mode", "content, context, combined (repeatable)",
                                      [](PipelineConfig& c, const auto& v) { c.modes = split_commas(v); });
}

void features_options(CLI::App* app, Overrides& ov) {
  ov.option<int>(app, "--ela-quality", "JPEG quality for error level analysis",
                 [](PipelineConfig& c, int v) { c.ela_quality = v; });
  ov.option<std::string>(app, "--keywords-file", "Clickbait keywords, one per line", [](PipelineConfig& c, const auto& v) {
    KeyValueConfig kv;
    kv.set("keywords_file", v);
    c = apply_config(kv, c);
  });
}

void predict_options(CLI::App* app, Overrides& ov) {
  ov.option<std::vector<std::string>>(app, "--level", "post, cascade (repeatable)",
                                      [](PipelineConfig& c, const auto& v) { c.levels = split_commas(v); });
  ov.option<double>(app, "--test-fraction", "Held-out fraction",
                    [](PipelineConfig& c, double v) { c.predict.test_fraction = v; });
  ov.option<std::string>(app, "--export-matrix", "Also write the feature matrix here",
                         [](PipelineConfig& c, const auto& v) { c.export_matrix = fs::path(v); });
}

void report_options(CLI::App* app, Overrides& ov) {
  ov.flag(app, "--no-markdown", "Skip report.md", [](PipelineConfig& c) { c.report_markdown = false; });
  ov.flag(app, "--no-plot-data", "Skip the top-5 attribution files",
          [](PipelineConfig& c) { c.report_plot_data = false; });
}

struct SynthArgs {
  std::string output;
  std::string truth;
  std::string shape = "mixed";
  SynthConfig config;
};

void synth_options(CLI::App* app, SynthArgs& a) {
  app->add_option("--output", a.output, "Dataset file (.jsonl or .csv)")->required();
  app->add_option("--truth", a.truth, "Truth file (post_id,cascade_id,parent_id)");
  app->add_option("--num-cascades", a.config.num_cascades, "Number of cascades");
  app->add_option("--fixed-size", a.config.fixed_size, "Posts per cascade (0: geometric sizes)");
  app->add_option("--size-p", a.config.size_p, "Geometric size parameter");
  app->add_option("--max-size", a.config.max_size, "Cap on geometric sizes");
  app->add_option("--shape", a.shape, "chain, star, random-tree or mixed");
  app->add_option("--crosspost-fraction", a.config.crosspost_evidence_fraction,
                  "Share of reposts linked by crosspost parent");
  app->add_option("--misinfo-prob", a.config.misinfo_prob, "Per-cascade misinformation probability");
  app->add_option("--genai-prob", a.config.genai_prob, "Per-cascade GenAI probability");
  app->add_option("--mean-gap-hours", a.config.mean_gap_hours, "Mean inter-post gap");
  app->add_option("--subreddits", a.config.subreddit_pool, "Subreddit pool size");
  app->add_flag("--degrade", a.config.degrade, "Inject dangling parents and URL variants");
  app->add_option("--degrade-fraction", a.config.degrade_fraction, "Share of posts degraded");
}

int run_synth(SynthArgs& a, std::uint64_t root_seed) {
  a.config.shape = tree_shape_from_name(a.shape);
  a.config.seed = derive_seed(root_seed, "synth");
  const SynthDataset data = generate(a.config);
  const fs::path out_path(a.output);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  {
    std::ofstream out(out_path, std::ios::binary);
    if (format_from_extension(out_path) == InputFormat::kDelimited) {
      write_delimited(out, data.records, out_path.extension() == ".tsv" ? '\t' : ',');
    } else {
      write_json_lines(out, data.records);
    }
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", a.output));
  }
  if (!a.truth.empty()) {
    std::ofstream out(a.truth, std::ios::binary);
    write_truth(out, data);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", a.truth));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image repost cascade reconstruction and virality analysis"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "Key-value configuration file");
  Overrides global;
  global.option<std::uint64_t>(&app, "--seed", "Root seed", [](PipelineConfig& c, std::uint64_t v) { c.seed = v; });
  global.option<std::string>(&app, "--output-dir", "Artifact directory",
                             [](PipelineConfig& c, const auto& v) { c.output_dir = v; });
  global.option<unsigned>(&app, "--threads", "Worker threads", [](PipelineConfig& c, unsigned v) { c.threads = v; });

  struct Command {
    CLI::App* app;
    Overrides overrides;
    std::optional<Stage> stage;
  };
  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, const std::string& desc, std::optional<Stage> stage) {
    commands.push_back(std::make_unique<Command>(Command{app.add_subcommand(name, desc), {}, stage}));
    return commands.back().get();
  };

  Command* ingest = add("ingest", "Parse, validate and deduplicate post records", Stage::kIngest);
  ingest_options(ingest->app, ingest->overrides);
  Command* cluster = add("cluster", "Group posts into cascades", Stage::kCluster);
  cluster_options(cluster->app, cluster->overrides);
  thumbnail_option(cluster->app, cluster->overrides);
  add("graph", "Build one repost tree per cascade", Stage::kGraph);
  Command* metrics = add("metrics", "Post and cascade metrics with flag-group tables", Stage::kMetrics);
  metrics_options(metrics->app, metrics->overrides);
  Command* features = add("features", "Post and cascade feature matrices", Stage::kFeatures);
  features_options(features->app, features->overrides);
  mode_option(features->app, features->overrides);
  thumbnail_option(features->app, features->overrides);
  Command* predict = add("predict", "Train and evaluate the logistic baseline", Stage::kPredict);
  predict_options(predict->app, predict->overrides);
  mode_option(predict->app, predict->overrides);
  Command* report = add("report", "Assemble report.md and plot data", Stage::kReport);
  report_options(report->app, report->overrides);
  Command* run = add("run", "Run the full pipeline", std::nullopt);
  ingest_options(run->app, run->overrides);
  cluster_options(run->app, run->overrides);
  thumbnail_option(run->app, run->overrides);
  metrics_options(run->app, run->overrides);
  features_options(run->app, run->overrides);
  mode_option(run->app, run->overrides);
  predict_options(run->app, run->overrides);
  report_options(run->app, run->overrides);
  run->overrides.option<std::string>(run->app, "--stages", "Comma-separated subset of stages",
                                     [](PipelineConfig& c, const auto& v) { c.stages = parse_stage_list(v); });

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset with planted cascades");
  SynthArgs synth_args;
  synth_options(synth, synth_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  PipelineConfig config;
  try {
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw std::invalid_argument(fmt::format("config file not found: {}", config_path));
      config = apply_config(KeyValueConfig::load(config_path), config);
    }
    global.apply(config);
    if (synth->parsed()) {
      try {
        return run_synth(synth_args, config.seed);
      } catch (const std::exception& e) {
        std::cerr << "[synth] " << e.what() << '\n';
        return 1;
      }
    }
    for (const auto& cmd : commands) {
      if (!cmd->app->parsed()) continue;
      cmd->overrides.apply(config);
      if (cmd->stage) config.stages = {*cmd->stage};
      return run_pipeline(config, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "[config] " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

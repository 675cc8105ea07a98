#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cascade/features.h"

namespace cascade {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per-class shuffle, then round(test_fraction * class_count) rows of each
// class go to the test side (at least one, and at least one left to train,
// when the class has two or more rows). Throws std::invalid_argument when a
// class is missing or the fraction is outside (0, 1).
Split stratified_split(const std::vector<bool>& labels, double test_fraction, std::uint64_t seed);

struct TrainOptions {
  int epochs = 500;
  double learning_rate = 0.1;
  double l2 = 1e-3;
  std::uint64_t seed = 0;  // recorded only; training is deterministic
};

// Logistic regression on standardized features.
struct ModelArtifact {
  std::vector<std::string> feature_names;
  std::vector<double> weights;  // one per feature; 0 for dropped columns
  double bias = 0.0;
  std::vector<double> mean;
  std::vector<double> stddev;  // > 0; dropped columns hold 1
  std::vector<std::string> dropped_columns;  // constant in the training data
  TrainOptions options;
  std::vector<double> loss_history;  // regularized loss before each epoch, then final

  // Pre-sigmoid score of a raw (unstandardized) feature row.
  double raw_score(std::span<const double> row) const;
  double probability(std::span<const double> row) const;
};

// Full-batch gradient descent on mean log-loss + (l2 / 2) * |w|^2. Throws
// std::invalid_argument for empty matrices or single-class labels.
ModelArtifact train_logistic(const FeatureMatrix& train, const std::vector<bool>& labels,
                             const TrainOptions& options = {});

std::vector<double> raw_scores(const ModelArtifact& model, const FeatureMatrix& matrix);
std::vector<bool> predict_labels(const ModelArtifact& model, const FeatureMatrix& matrix);

// Rank-statistic AUC with ties counted one half. Throws when a class is
// missing.
double roc_auc(std::span<const double> scores, const std::vector<bool>& labels);
double accuracy(const std::vector<bool>& predicted, const std::vector<bool>& labels);
// Unweighted mean of per-class F1 over classes present in labels or
// predictions.
double macro_f1(const std::vector<bool>& predicted, const std::vector<bool>& labels);

enum class Metric { kAuc, kAccuracy };

// Mean metric drop per feature over `repeats` within-column shuffles.
std::vector<double> permutation_importance(const ModelArtifact& model, const FeatureMatrix& test,
                                           const std::vector<bool>& labels, Metric metric,
                                           int repeats, std::uint64_t seed);

using ScoreFunction = std::function<double(std::span<const double>)>;

// Exact Shapley values by enumerating all 2^n coalitions. A coalition's value
// is the score with absent features replaced by the background values.
// Throws std::invalid_argument when n exceeds max_features.
std::vector<double> exact_shapley(const ScoreFunction& score, std::span<const double> instance,
                                  std::span<const double> background,
                                  std::size_t max_features = 15);
std::vector<double> exact_shapley(const ModelArtifact& model, std::span<const double> instance,
                                  std::span<const double> background,
                                  std::size_t max_features = 15);

// Column means of a matrix.
std::vector<double> column_means(const FeatureMatrix& matrix);

// ---- experiment grid -------------------------------------------------------------

struct ExperimentCell {
  std::string level;  // "post" or "cascade"
  std::string mode;   // "content", "context", "combined"
  const FeatureMatrix* matrix = nullptr;
};

struct Attribution {
  std::string feature;
  double value = 0.0;
};

struct ExperimentRow {
  std::string level;
  std::string mode;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t features = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double auc = 0.0;
  // "shapley" (mean |value| over test rows) or "permutation" (mean AUC drop).
  std::string attribution_method;
  std::vector<Attribution> attributions;  // sorted descending
};

struct GridOptions {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  TrainOptions train;
  std::size_t max_shapley_features = 15;
  int permutation_repeats = 5;
};

// One row per cell. Throws std::invalid_argument when a cell has no matrix
// or the matrix is unlabeled.
std::vector<ExperimentRow> run_experiment_grid(std::span<const ExperimentCell> cells,
                                               const GridOptions& options);

}  // namespace cascade

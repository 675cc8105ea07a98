#include "cascade/predict.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "cascade/random.h"

namespace cascade {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void require_both_classes(const std::vector<bool>& labels, const char* what) {
  const auto pos = std::count(labels.begin(), labels.end(), true);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw std::invalid_argument(fmt::format("{}: both classes must be present", what));
  }
}

double evaluate(Metric metric, const ModelArtifact& model, const FeatureMatrix& m,
                const std::vector<bool>& labels) {
  if (metric == Metric::kAuc) {
    const auto scores = raw_scores(model, m);
    return roc_auc(scores, labels);
  }
  return accuracy(predict_labels(model, m), labels);
}

}  // namespace

Split stratified_split(const std::vector<bool>& labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("stratified_split: test_fraction must lie in (0, 1)");
  }
  require_both_classes(labels, "stratified_split");
  Rng rng(seed);
  Split split;
  for (bool cls : {true, false}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    shuffle(members, rng);
    auto take = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
    if (members.size() >= 2) take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    split.test.insert(split.test.end(), members.begin(), members.begin() + take);
    split.train.insert(split.train.end(), members.begin() + take, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

double ModelArtifact::raw_score(std::span<const double> row) const {
  if (row.size() != weights.size()) {
    throw std::invalid_argument(fmt::format("model expects {} features, row has {}", weights.size(), row.size()));
  }
  double z = bias;
  for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * (row[j] - mean[j]) / stddev[j];
  return z;
}

double ModelArtifact::probability(std::span<const double> row) const { return sigmoid(raw_score(row)); }

ModelArtifact train_logistic(const FeatureMatrix& train, const std::vector<bool>& labels,
                             const TrainOptions& options) {
  const std::size_t n = train.rows();
  const std::size_t d = train.cols();
  if (n == 0 || d == 0) throw std::invalid_argument("train_logistic: empty matrix");
  if (labels.size() != n) throw std::invalid_argument("train_logistic: label count mismatch");
  require_both_classes(labels, "train_logistic");

  ModelArtifact model;
  model.feature_names = train.columns();
  model.options = options;
  model.mean.assign(d, 0.0);
  model.stddev.assign(d, 1.0);
  model.weights.assign(d, 0.0);
  std::vector<bool> active(d, true);
  for (std::size_t j = 0; j < d; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += train.at(i, j);
    mu /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (train.at(i, j) - mu) * (train.at(i, j) - mu);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    model.mean[j] = mu;
    if (sd > 1e-12 * std::max(1.0, std::fabs(mu))) {
      model.stddev[j] = sd;
    } else {
      active[j] = false;
      model.dropped_columns.push_back(train.columns()[j]);
    }
  }

  std::vector<double> z(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (active[j]) z[i * d + j] = (train.at(i, j) - model.mean[j]) / model.stddev[j];
    }
  }

  std::vector<double> grad(d);
  std::vector<double> margin(n);
  auto loss_and_margins = [&] {
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = model.bias;
      for (std::size_t j = 0; j < d; ++j) s += model.weights[j] * z[i * d + j];
      margin[i] = s;
      loss += labels[i] ? softplus(-s) : softplus(s);
    }
    double reg = 0.0;
    for (double w : model.weights) reg += w * w;
    return loss / static_cast<double>(n) + 0.5 * options.l2 * reg;
  };

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    model.loss_history.push_back(loss_and_margins());
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = sigmoid(margin[i]) - (labels[i] ? 1.0 : 0.0);
      grad_b += r;
      for (std::size_t j = 0; j < d; ++j) grad[j] += r * z[i * d + j];
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (!active[j]) continue;
      const double g = grad[j] / static_cast<double>(n) + options.l2 * model.weights[j];
      model.weights[j] -= options.learning_rate * g;
    }
    model.bias -= options.learning_rate * grad_b / static_cast<double>(n);
  }
  model.loss_history.push_back(loss_and_margins());
  return model;
}

std::vector<double> raw_scores(const ModelArtifact& model, const FeatureMatrix& m) {
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = model.raw_score(m.row(i));
  return out;
}

std::vector<bool> predict_labels(const ModelArtifact& model, const FeatureMatrix& m) {
  std::vector<bool> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = model.raw_score(m.row(i)) >= 0.0;
  return out;
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: size mismatch");
  require_both_classes(labels, "roc_auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum keeps averaged tie ranks integral.
  std::int64_t twice_rank_sum = 0;
  std::int64_t positives = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end + 1 < n && scores[order[end + 1]] == scores[order[start]]) ++end;
    const auto twice_rank = static_cast<std::int64_t>(start + 1 + end + 1);
    for (std::size_t k = start; k <= end; ++k) {
      if (labels[order[k]]) {
        twice_rank_sum += twice_rank;
        ++positives;
      }
    }
    start = end + 1;
  }
  const std::int64_t negatives = static_cast<std::int64_t>(n) - positives;
  const std::int64_t twice_u = twice_rank_sum - positives * (positives + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives * negatives));
}

double accuracy(const std::vector<bool>& predicted, const std::vector<bool>& labels) {
  if (predicted.size() != labels.size() || labels.empty()) {
    throw std::invalid_argument("accuracy: size mismatch or empty input");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double macro_f1(const std::vector<bool>& predicted, const std::vector<bool>& labels) {
  if (predicted.size() != labels.size() || labels.empty()) {
    throw std::invalid_argument("macro_f1: size mismatch or empty input");
  }
  double total = 0.0;
  int classes = 0;
  for (bool cls : {false, true}) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (predicted[i] == cls && labels[i] == cls) ++tp;
      else if (predicted[i] == cls) ++fp;
      else if (labels[i] == cls) ++fn;
    }
    if (tp + fp + fn == 0) continue;  // class absent from both
    total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    ++classes;
  }
  return total / classes;
}

std::vector<double> permutation_importance(const ModelArtifact& model, const FeatureMatrix& test,
                                           const std::vector<bool>& labels, Metric metric,
                                           int repeats, std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("permutation_importance: repeats must be >= 1");
  const double baseline = evaluate(metric, model, test, labels);
  std::vector<double> importance(test.cols(), 0.0);
  FeatureMatrix shuffled = test;
  for (std::size_t j = 0; j < test.cols(); ++j) {
    double drop = 0.0;
    for (int r = 0; r < repeats; ++r) {
      Rng rng(derive_seed(seed, j, static_cast<std::uint64_t>(r)));
      std::vector<double> column(test.rows());
      for (std::size_t i = 0; i < test.rows(); ++i) column[i] = test.at(i, j);
      shuffle(column, rng);
      for (std::size_t i = 0; i < test.rows(); ++i) shuffled.at(i, j) = column[i];
      drop += baseline - evaluate(metric, model, shuffled, labels);
    }
    for (std::size_t i = 0; i < test.rows(); ++i) shuffled.at(i, j) = test.at(i, j);
    importance[j] = drop / repeats;
  }
  return importance;
}

std::vector<double> exact_shapley(const ScoreFunction& score, std::span<const double> instance,
                                  std::span<const double> background, std::size_t max_features) {
  const std::size_t n = instance.size();
  if (background.size() != n) throw std::invalid_argument("exact_shapley: background size mismatch");
  if (n > max_features || n >= 63) {
    throw std::invalid_argument(
        fmt::format("exact_shapley: {} features exceeds the limit of {}", n, max_features));
  }
  if (n == 0) return {};
  const std::size_t coalitions = std::size_t{1} << n;
  std::vector<double> value(coalitions);
  std::vector<double> x(background.begin(), background.end());
  for (std::size_t mask = 0; mask < coalitions; ++mask) {
    for (std::size_t j = 0; j < n; ++j) x[j] = (mask >> j) & 1 ? instance[j] : background[j];
    value[mask] = score(x);
  }
  // weight[s] = s! (n - s - 1)! / n!
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) {
    weight[s] = std::exp(std::lgamma(double(s) + 1) + std::lgamma(double(n - s)) - std::lgamma(double(n) + 1));
  }
  std::vector<double> phi(n, 0.0);
  for (std::size_t mask = 0; mask < coalitions; ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    for (std::size_t j = 0; j < n; ++j) {
      if ((mask >> j) & 1) continue;
      phi[j] += weight[size] * (value[mask | (std::size_t{1} << j)] - value[mask]);
    }
  }
  return phi;
}

std::vector<double> exact_shapley(const ModelArtifact& model, std::span<const double> instance,
                                  std::span<const double> background, std::size_t max_features) {
  return exact_shapley([&](std::span<const double> row) { return model.raw_score(row); }, instance,
                       background, max_features);
}

std::vector<double> column_means(const FeatureMatrix& m) {
  std::vector<double> means(m.cols(), 0.0);
  if (m.rows() == 0) return means;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) means[j] += m.at(i, j);
  }
  for (double& v : means) v /= static_cast<double>(m.rows());
  return means;
}

std::vector<ExperimentRow> run_experiment_grid(std::span<const ExperimentCell> cells,
                                               const GridOptions& options) {
  std::vector<ExperimentRow> rows;
  for (const auto& cell : cells) {
    if (!cell.matrix) {
      throw std::invalid_argument(fmt::format("no feature matrix for {}/{}", cell.level, cell.mode));
    }
    const FeatureMatrix& m = *cell.matrix;
    if (!m.labeled()) {
      throw std::invalid_argument(fmt::format("feature matrix for {}/{} is unlabeled", cell.level, cell.mode));
    }
    const auto labels = m.labels();
    // Modes of one level share a split so their scores are comparable.
    const Split split = stratified_split(labels, options.test_fraction, derive_seed(options.seed, cell.level));
    const FeatureMatrix train = m.select_rows(split.train);
    const FeatureMatrix test = m.select_rows(split.test);
    const auto train_labels = train.labels();
    const auto test_labels = test.labels();
    const ModelArtifact model = train_logistic(train, train_labels, options.train);

    ExperimentRow row;
    row.level = cell.level;
    row.mode = cell.mode;
    row.train_rows = train.rows();
    row.test_rows = test.rows();
    row.features = m.cols();
    const auto predicted = predict_labels(model, test);
    row.accuracy = accuracy(predicted, test_labels);
    row.macro_f1 = macro_f1(predicted, test_labels);
    row.auc = roc_auc(raw_scores(model, test), test_labels);

    std::vector<double> scores(m.cols(), 0.0);
    if (m.cols() <= options.max_shapley_features) {
      row.attribution_method = "shapley";
      const auto background = column_means(train);
      for (std::size_t i = 0; i < test.rows(); ++i) {
        const auto phi = exact_shapley(model, test.row(i), background, options.max_shapley_features);
        for (std::size_t j = 0; j < phi.size(); ++j) scores[j] += std::fabs(phi[j]);
      }
      for (double& s : scores) s /= static_cast<double>(test.rows());
    } else {
      row.attribution_method = "permutation";
      scores = permutation_importance(model, test, test_labels, Metric::kAuc,
                                      options.permutation_repeats,
                                      derive_seed(options.seed, "permutation/" + cell.level + "/" + cell.mode));
    }
    for (std::size_t j = 0; j < m.cols(); ++j) row.attributions.push_back({m.columns()[j], scores[j]});
    std::stable_sort(row.attributions.begin(), row.attributions.end(),
                     [](const Attribution& a, const Attribution& b) { return a.value > b.value; });
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cascade

#include "cfnade/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cfnade {

double rmse(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.empty()) throw std::invalid_argument("rmse: empty input");
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("rmse: length mismatch " + std::to_string(truth.size()) +
                                " vs " + std::to_string(predicted.size()));
  }
  double sum = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    double d = truth[i] - predicted[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(truth.size()));
}

namespace {

void check_compatible(const Dataset& a, const Dataset& b, const char* where) {
  if (a.basis != b.basis || a.num_entities != b.num_entities ||
      a.num_targets != b.num_targets || a.num_ratings != b.num_ratings) {
    throw DataError(std::string(where) + ": datasets disagree, " + basis_name(a.basis) +
                    "-based " + std::to_string(a.num_entities) + "x" +
                    std::to_string(a.num_targets) + " K=" + std::to_string(a.num_ratings) +
                    " vs " + basis_name(b.basis) + "-based " + std::to_string(b.num_entities) +
                    "x" + std::to_string(b.num_targets) + " K=" + std::to_string(b.num_ratings));
  }
}

}  // namespace

EvalReport evaluate_model(const Parameters& params, const ModelConfig& config,
                          const Dataset& eval_set, const Dataset& history_set) {
  check_compatible(eval_set, history_set, "evaluate_model");
  if (config.num_items != eval_set.num_targets || config.num_ratings != eval_set.num_ratings) {
    throw DataError("evaluate_model: model expects " + std::to_string(config.num_items) +
                    " targets K=" + std::to_string(config.num_ratings) + ", data has " +
                    std::to_string(eval_set.num_targets) +
                    " K=" + std::to_string(eval_set.num_ratings));
  }

  // Targets never observed in the history partition get the default rating.
  std::vector<int> target_observations(eval_set.num_targets, 0);
  for (const auto& list : history_set.entries) {
    for (const auto& ir : list) target_observations[ir.item]++;
  }

  const int K = eval_set.num_ratings;
  const double fallback = default_prediction(K);
  EvalReport report;
  report.num_ratings = K;
  report.confusion.assign(static_cast<size_t>(K) * K, 0);

  double sq_sum = 0.0;
  for (int e = 0; e < eval_set.num_entities; ++e) {
    const auto& queries = eval_set.entries[e];
    if (queries.empty()) continue;
    const auto& history = history_set.entries[e];
    std::vector<Vector> layers = hidden_from_prefix(params, config, history);
    ScoreContext ctx = make_score_context(params, config, layers.back());
    for (const auto& q : queries) {
      double pred;
      if (target_observations[q.item] == 0) {
        pred = fallback;
        report.cold_count++;
      } else {
        Vector scores = scores_with_context(params, config, ctx, q.item);
        pred = expected_rating(softmax_conditional(scores));
      }
      double err = static_cast<double>(q.rating) - pred;
      sq_sum += err * err;
      int rounded = std::clamp(static_cast<int>(std::floor(pred + 0.5)), 1, K);
      report.confusion[static_cast<size_t>(q.rating - 1) * K + rounded - 1]++;
      report.count++;
    }
  }
  if (report.count == 0) throw DataError("evaluate_model: evaluation set is empty");
  report.rmse = std::sqrt(sq_sum / static_cast<double>(report.count));
  return report;
}

double item_mean_baseline(const Dataset& train_set, const Dataset& eval_set) {
  check_compatible(train_set, eval_set, "item_mean_baseline");
  // Conceptual items are the entities of item-based data, targets otherwise.
  const bool item_is_entity = train_set.basis == Basis::kItem;
  const int num_items = item_is_entity ? train_set.num_entities : train_set.num_targets;

  std::vector<double> sums(num_items, 0.0);
  std::vector<size_t> counts(num_items, 0);
  double global_sum = 0.0;
  size_t global_count = 0;
  for (int e = 0; e < train_set.num_entities; ++e) {
    for (const auto& ir : train_set.entries[e]) {
      int item = item_is_entity ? e : ir.item;
      sums[item] += ir.rating;
      counts[item]++;
      global_sum += ir.rating;
      global_count++;
    }
  }
  if (global_count == 0) throw DataError("item_mean_baseline: empty training set");
  const double global_mean = global_sum / static_cast<double>(global_count);

  double sq_sum = 0.0;
  size_t n = 0;
  for (int e = 0; e < eval_set.num_entities; ++e) {
    for (const auto& ir : eval_set.entries[e]) {
      int item = item_is_entity ? e : ir.item;
      double pred = counts[item] > 0 ? sums[item] / static_cast<double>(counts[item])
                                     : global_mean;
      double err = static_cast<double>(ir.rating) - pred;
      sq_sum += err * err;
      n++;
    }
  }
  if (n == 0) throw DataError("item_mean_baseline: empty evaluation set");
  return std::sqrt(sq_sum / static_cast<double>(n));
}

}  // namespace cfnade

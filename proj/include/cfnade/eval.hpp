#pragma once

#include <span>
#include <vector>

#include "cfnade/data.hpp"
#include "cfnade/model.hpp"

namespace cfnade {

struct EvalReport {
  double rmse = 0.0;
  size_t count = 0;       // ratings evaluated
  size_t cold_count = 0;  // ratings predicted by the default rule
  int num_ratings = 0;    // K
  // K x K counts of true rating (row) vs rounded prediction (column);
  // diagnostic only, never part of the RMSE.
  std::vector<size_t> confusion;

  size_t confusion_at(int true_rating, int predicted_rating) const {
    return confusion[static_cast<size_t>(true_rating - 1) * num_ratings + predicted_rating - 1];
  }
};

// sqrt(mean squared difference). Throws on empty or mismatched input.
double rmse(std::span<const double> truth, std::span<const double> predicted);

// Predicts every rating in eval_set from the model, using the entity's
// history_set entries as conditioning history. Targets with zero
// observations anywhere in history_set fall back to the midpoint default
// rating and are counted as cold. history_set and eval_set must share
// basis and dimensions.
EvalReport evaluate_model(const Parameters& params, const ModelConfig& config,
                          const Dataset& eval_set, const Dataset& history_set);

// Predicts each eval rating by the item's mean training rating (global mean
// for items with no training ratings) and returns the RMSE. "Item" follows
// the conceptual item: the entity for item-based data, the target otherwise.
double item_mean_baseline(const Dataset& train_set, const Dataset& eval_set);

}  // namespace cfnade

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cfnade/data.hpp"
#include "cfnade/loss.hpp"
#include "cfnade/model.hpp"

namespace cfnade {

// Training went numerically off the rails (non-finite values, runaway
// validation error).
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.001;
  double first_layer_lr_multiplier = 1.0;  // applies to in_weight/factors and hidden_bias
  double weight_decay = 0.0;               // L2, folded into weight gradients, biases excluded
  int batch_size = 512;                    // entities per update
  int max_epochs = 100;
  int patience = 10;  // epochs without validation improvement before stopping
  uint64_t seed = 0;
  CostConfig cost;
  bool deterministic = true;  // single worker, fixed reduction order (always on currently)
};

void validate_config(const TrainConfig& config);

// One sampled training case: a uniform ordering of the entity's rated
// targets and a uniform split position i in 1..D. Prefix holds positions
// < i, suffix positions >= i, both in sampled order.
struct TrainStep {
  std::vector<ItemRating> prefix;
  std::vector<ItemRating> suffix;
  int num_rated = 0;  // D
  int split_pos = 1;  // i
};

TrainStep sample_training_step(Rng& rng, std::span<const ItemRating> rated);

// Analytic gradient of the split-scaled cost for one step, accumulated into
// `grads` (which must be zero_parameters-shaped for the same config).
// Only arrays touched by the step's items receive contributions. Returns the
// step cost. Throws DivergenceError on non-finite intermediates.
double backprop_accumulate(const Parameters& params, const ModelConfig& config,
                           const TrainStep& step, const CostConfig& cost, Gradients& grads);

// Convenience wrapper returning a fresh gradient set.
struct BackpropResult {
  double cost = 0.0;
  Gradients grads;
};
BackpropResult backprop_step(const Parameters& params, const ModelConfig& config,
                             const TrainStep& step, const CostConfig& cost);

// Adam first/second moment accumulators, array-for-array with Parameters.
struct AdamState {
  Gradients m;
  Gradients v;
  int64_t step = 0;
};
AdamState make_adam_state(const ModelConfig& config);

// One Adam update (decay rates 0.9/0.999, eps 1e-8, bias-corrected).
// Weight decay enters as grad + weight_decay * param on weight matrices;
// first-layer parameters use learning_rate * first_layer_lr_multiplier.
void adam_update(Parameters& params, const Gradients& grads, AdamState& state,
                 const TrainConfig& config);

struct EpochLog {
  int epoch = 0;
  double train_cost = 0.0;
  double valid_rmse = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Parameters best_params;
  double best_valid_rmse = 0.0;
  int best_epoch = 0;
  std::vector<EpochLog> log;
};

// Full training loop: entities shuffled each epoch, one sampled (ordering,
// split) per entity, mini-batches of batch_size entities, batch gradient =
// mean of per-entity gradients, Adam updates, per-epoch validation RMSE with
// the train set as history, patience-based early stopping on the best
// validation RMSE. If log_out is given, one tab-separated line per epoch:
// epoch, mean train cost, validation RMSE, wall seconds.
TrainResult train(const Dataset& train_set, const Dataset& valid_set,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  std::ostream* log_out = nullptr);

}  // namespace cfnade

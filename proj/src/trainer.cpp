#include "cfnade/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "cfnade/eval.hpp"

namespace cfnade {

void validate_config(const TrainConfig& config) {
  // learning_rate 0 is allowed: it freezes the parameters, which some tests
  // rely on.
  if (config.learning_rate < 0.0)
    throw std::invalid_argument("train config: learning_rate must be >= 0");
  if (config.first_layer_lr_multiplier <= 0.0)
    throw std::invalid_argument("train config: first_layer_lr_multiplier must be > 0");
  if (config.weight_decay < 0.0)
    throw std::invalid_argument("train config: weight_decay must be >= 0");
  if (config.batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (config.max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
  if (config.patience < 1) throw std::invalid_argument("train config: patience must be >= 1");
  if (config.cost.lambda < 0.0 || config.cost.lambda > 1.0)
    throw std::invalid_argument("train config: lambda must lie in [0, 1]");
}

TrainStep sample_training_step(Rng& rng, std::span<const ItemRating> rated) {
  const int num_rated = static_cast<int>(rated.size());
  if (num_rated < 1) throw std::invalid_argument("sample_training_step: entity has no ratings");
  std::vector<int> order = sample_permutation(rng, num_rated);
  int split = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(num_rated)));

  TrainStep step;
  step.num_rated = num_rated;
  step.split_pos = split;
  step.prefix.reserve(split - 1);
  step.suffix.reserve(num_rated - split + 1);
  for (int pos = 0; pos < num_rated; ++pos) {
    const ItemRating& ir = rated[order[pos]];
    if (pos < split - 1) step.prefix.push_back(ir);
    else step.suffix.push_back(ir);
  }
  return step;
}

double backprop_accumulate(const Parameters& params, const ModelConfig& config,
                           const TrainStep& step, const CostConfig& cost, Gradients& grads) {
  const int K = config.num_ratings;
  const int H = config.hidden;

  // Forward.
  ForwardTrace trace = hidden_trace_from_prefix(params, config, step.prefix);
  const Vector& h_top = trace.layers.back();
  ScoreContext ctx = make_score_context(params, config, h_top);

  SplitCostInput input;
  input.num_rated = step.num_rated;
  input.split_pos = step.split_pos;
  input.scores.reserve(step.suffix.size());
  input.ratings.reserve(step.suffix.size());
  for (const auto& ir : step.suffix) {
    input.scores.push_back(scores_with_context(params, config, ctx, ir.item));
    input.ratings.push_back(ir.rating);
  }
  SplitCostResult sc = split_cost(input, cost);
  if (!std::isfinite(sc.cost)) {
    throw DivergenceError("backprop: non-finite cost " + std::to_string(sc.cost) +
                          " (split " + std::to_string(step.split_pos) + "/" +
                          std::to_string(step.num_rated) + ")");
  }

  // Score-level backward: through the output side into dh (and the rank-J
  // intermediate for the factored form).
  Vector dh(H, 0.0);
  Vector dfh;  // d cost / d (out_hidden_factor * h)
  if (config.factored()) dfh.assign(config.rank, 0.0);
  Vector dterm(K);
  for (size_t s = 0; s < step.suffix.size(); ++s) {
    const int item = step.suffix[s].item;
    const Vector& ds = sc.score_grads[s];
    if (config.share_ratings) {
      // score_k sums the per-rating terms up to k, so each term j collects
      // the score gradients for every k >= j.
      dterm[K - 1] = ds[K - 1];
      for (int k = K - 2; k >= 0; --k) dterm[k] = dterm[k + 1] + ds[k];
    } else {
      std::copy(ds.begin(), ds.end(), dterm.begin());
    }
    for (int k = 0; k < K; ++k) {
      const double g = dterm[k];
      if (g == 0.0) continue;
      grads.score_bias[k][item] += g;
      if (config.factored()) {
        axpy(g, ctx.factor_h, grads.out_item_factor[k].row(item));
        axpy(g, params.out_item_factor[k].row(item), dfh);
      } else {
        axpy(g, h_top, grads.out_weight[k].row(item));
        axpy(g, params.out_weight[k].row(item), dh);
      }
    }
  }
  if (config.factored()) {
    add_outer(grads.out_hidden_factor, dfh, h_top);
    matvec_transposed_add(params.out_hidden_factor, dfh, dh);
  }

  // Through the hidden stack. tanh'(z) = 1 - h^2.
  Vector da(H);
  for (int l = config.layers; l >= 2; --l) {
    const Vector& hl = trace.layers[l - 1];
    for (int i = 0; i < H; ++i) da[i] = dh[i] * (1.0 - hl[i] * hl[i]);
    add_in_place(grads.deep_bias[l - 2], da);
    add_outer(grads.deep_weight[l - 2], da, trace.layers[l - 2]);
    std::fill(dh.begin(), dh.end(), 0.0);
    matvec_transposed_add(params.deep_weight[l - 2], da, dh);
  }
  const Vector& h1 = trace.layers[0];
  for (int i = 0; i < H; ++i) da[i] = dh[i] * (1.0 - h1[i] * h1[i]);
  if (!std::isfinite(da.empty() ? 0.0 : da[0])) {
    throw DivergenceError("backprop: non-finite hidden gradient");
  }
  add_in_place(grads.hidden_bias, da);

  // Into the input-side weights: only prefix items are touched. With
  // sharing, every rating level <= the observed rating participates.
  if (config.factored()) {
    add_outer(grads.in_hidden_factor, da, trace.factor_input_sum);
    Vector bda(config.rank, 0.0);
    matvec_transposed_add(params.in_hidden_factor, da, bda);
    for (const auto& ir : step.prefix) {
      const int upto = config.share_ratings ? ir.rating : 1;
      for (int t = 0; t < upto; ++t) {
        const int level = config.share_ratings ? t : ir.rating - 1;
        add_in_place(grads.in_item_factor[level].row(ir.item), bda);
      }
    }
  } else {
    for (const auto& ir : step.prefix) {
      const int upto = config.share_ratings ? ir.rating : 1;
      for (int t = 0; t < upto; ++t) {
        const int level = config.share_ratings ? t : ir.rating - 1;
        add_in_place(grads.in_weight[level].row(ir.item), da);
      }
    }
  }
  return sc.cost;
}

BackpropResult backprop_step(const Parameters& params, const ModelConfig& config,
                             const TrainStep& step, const CostConfig& cost) {
  BackpropResult result;
  result.grads = zero_parameters(config);
  result.cost = backprop_accumulate(params, config, step, cost, result.grads);
  return result;
}

AdamState make_adam_state(const ModelConfig& config) {
  AdamState state;
  state.m = zero_parameters(config);
  state.v = zero_parameters(config);
  state.step = 0;
  return state;
}

void adam_update(Parameters& params, const Gradients& grads, AdamState& state,
                 const TrainConfig& config) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  state.step += 1;
  const double corr1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));

  auto pv = parameter_views(params);
  auto gv = parameter_views(grads);
  auto mv = parameter_views(state.m);
  auto vv = parameter_views(state.v);
  if (pv.size() != gv.size() || pv.size() != mv.size() || pv.size() != vv.size()) {
    throw std::invalid_argument("adam_update: mismatched parameter structure");
  }
  for (size_t a = 0; a < pv.size(); ++a) {
    std::vector<double>& theta = *pv[a].values;
    const std::vector<double>& grad = *gv[a].values;
    std::vector<double>& m = *mv[a].values;
    std::vector<double>& v = *vv[a].values;
    if (theta.size() != grad.size()) {
      throw std::invalid_argument("adam_update: gradient shape mismatch for " + pv[a].name);
    }
    const double lr = config.learning_rate *
                      (pv[a].is_first_layer ? config.first_layer_lr_multiplier : 1.0);
    const bool decay = pv[a].is_weight && config.weight_decay != 0.0;
    for (size_t i = 0; i < theta.size(); ++i) {
      double g = grad[i];
      if (decay) g += config.weight_decay * theta[i];
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
      theta[i] -= lr * (m[i] / corr1) / (std::sqrt(v[i] / corr2) + kEps);
    }
  }
}

namespace {

void zero_in_place(Gradients& grads) {
  for (auto& view : parameter_views(grads)) {
    std::fill(view.values->begin(), view.values->end(), 0.0);
  }
}

void scale_in_place(Gradients& grads, double factor) {
  for (auto& view : parameter_views(grads)) {
    for (double& v : *view.values) v *= factor;
  }
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& valid_set,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  std::ostream* log_out) {
  validate_config(model_config);
  validate_config(train_config);
  if (train_set.num_targets != model_config.num_items ||
      train_set.num_ratings != model_config.num_ratings) {
    throw DataError("train: model expects " + std::to_string(model_config.num_items) +
                    " targets K=" + std::to_string(model_config.num_ratings) + ", data has " +
                    std::to_string(train_set.num_targets) +
                    " K=" + std::to_string(train_set.num_ratings));
  }
  if (train_set.total_ratings() == 0) throw DataError("train: empty training set");
  if (valid_set.total_ratings() == 0) throw DataError("train: empty validation set");

  Rng rng(train_config.seed);
  Parameters params = init_parameters(model_config, rng);
  AdamState adam = make_adam_state(model_config);
  Gradients grads = zero_parameters(model_config);

  std::vector<int> entities;
  for (int e = 0; e < train_set.num_entities; ++e) {
    if (!train_set.entries[e].empty()) entities.push_back(e);
  }

  TrainResult result;
  result.best_valid_rmse = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;
  int divergent_streak = 0;

  for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle(rng, entities);

    double cost_sum = 0.0;
    size_t cases = 0;
    const size_t batch = static_cast<size_t>(train_config.batch_size);
    for (size_t start = 0; start < entities.size(); start += batch) {
      const size_t n = std::min(batch, entities.size() - start);
      zero_in_place(grads);
      for (size_t b = 0; b < n; ++b) {
        const int e = entities[start + b];
        TrainStep step = sample_training_step(rng, train_set.entries[e]);
        cost_sum += backprop_accumulate(params, model_config, step, train_config.cost, grads);
      }
      cases += n;
      scale_in_place(grads, 1.0 / static_cast<double>(n));
      adam_update(params, grads, adam, train_config);
    }

    const double valid_rmse = evaluate_model(params, model_config, valid_set, train_set).rmse;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EpochLog entry{epoch, cases > 0 ? cost_sum / static_cast<double>(cases) : 0.0, valid_rmse,
                   seconds};
    result.log.push_back(entry);
    if (log_out) {
      char line[160];
      std::snprintf(line, sizeof(line), "%d\t%.17g\t%.17g\t%.3f\n", entry.epoch,
                    entry.train_cost, entry.valid_rmse, entry.seconds);
      *log_out << line;
      log_out->flush();
    }

    if (valid_rmse < result.best_valid_rmse) {
      result.best_valid_rmse = valid_rmse;
      result.best_epoch = epoch;
      result.best_params = params;
      epochs_since_best = 0;
    } else {
      epochs_since_best++;
    }

    if (!std::isfinite(valid_rmse) || valid_rmse > model_config.num_ratings) {
      if (++divergent_streak >= 3) {
        throw DivergenceError("train: validation RMSE " + std::to_string(valid_rmse) +
                              " above the rating scale for 3 consecutive epochs");
      }
    } else {
      divergent_streak = 0;
    }

    if (epochs_since_best >= train_config.patience) break;
  }
  return result;
}

}  // namespace cfnade

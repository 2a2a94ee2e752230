#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfnade/data.hpp"
#include "cfnade/numeric.hpp"

namespace cfnade {

struct ModelConfig {
  int num_items = 0;          // size of the rated dimension (targets of the dataset basis)
  int num_ratings = 0;        // K
  int hidden = 0;             // units per hidden layer
  int layers = 1;             // hidden layer count, >= 1
  int rank = 0;               // factor rank; 0 = full parameterization
  bool share_ratings = false; // cumulative weight sharing across the rating scale

  bool factored() const { return rank > 0; }
};

void validate_config(const ModelConfig& config);

// All learnable arrays. Per-item blocks are stored item-major so each item's
// weight vector is contiguous: row m of in_weight[k] is the hidden-side
// column for item m at rating k+1, and row m of out_weight[k] is the score
// row for item m at rating k+1. Full and factored forms are mutually
// exclusive; unused arrays stay empty.
struct Parameters {
  // full form
  std::vector<Matrix> in_weight;   // per rating, M x H
  std::vector<Matrix> out_weight;  // per rating, M x H

  // factored form: in_weight ~ in_item_factor * in_hidden_factor^T and
  // out_weight ~ out_item_factor * out_hidden_factor, both of rank J
  Matrix in_hidden_factor;               // H x J
  std::vector<Matrix> in_item_factor;    // per rating, M x J
  std::vector<Matrix> out_item_factor;   // per rating, M x J
  Matrix out_hidden_factor;              // J x H

  // common
  std::vector<Vector> score_bias;  // per rating, length M
  Vector hidden_bias;              // length H

  // layers 2..L
  std::vector<Matrix> deep_weight;  // H x H each
  std::vector<Vector> deep_bias;    // length H each
};

// Gradients mirror the parameter arrays one for one.
using Gradients = Parameters;

struct ParamView {
  std::string name;
  std::vector<double>* values;
  bool is_weight;       // weight decay applies
  bool is_first_layer;  // first-layer learning-rate multiplier applies
};

struct ConstParamView {
  std::string name;
  const std::vector<double>* values;
  bool is_weight;
  bool is_first_layer;
};

// Fixed enumeration order of all arrays; doubles as the checkpoint layout
// and the parameter-initialization draw order.
std::vector<ParamView> parameter_views(Parameters& p);
std::vector<ConstParamView> parameter_views(const Parameters& p);

Parameters zero_parameters(const ModelConfig& config);

// Weights drawn uniformly from +-sqrt(6 / (fan_in + fan_out)) per matrix,
// biases zero.
Parameters init_parameters(const ModelConfig& config, Rng& rng);

// Exact number of learnable scalars for the given config.
uint64_t parameter_count(const ModelConfig& config);

// Hidden-side weight vector for (item, rating): the item's in_weight row,
// cumulative over ratings <= rating when sharing is on, and mapped through
// the rank-J factors in the factored form.
Vector effective_w_column(const Parameters& params, const ModelConfig& config, int item,
                          int rating);

// Per-layer hidden activations given the prefix of (item, rating) pairs.
// Layer 1 is tanh(hidden_bias + sum of effective columns); deeper layers are
// a plain feed-forward chain. The prefix sum runs in ascending item order so
// results are bit-reproducible. Throws on a duplicate prefix item.
std::vector<Vector> hidden_from_prefix(const Parameters& params, const ModelConfig& config,
                                       std::span<const ItemRating> prefix);

// Forward pass state kept around for backpropagation.
struct ForwardTrace {
  std::vector<Vector> layers;  // activations, one per hidden layer
  Vector factor_input_sum;     // factored only: summed effective item-factor rows
};
ForwardTrace hidden_trace_from_prefix(const Parameters& params, const ModelConfig& config,
                                      std::span<const ItemRating> prefix);

// Length-K preference scores for one item given the top hidden layer. With
// sharing, entry k is the cumulative sum of the per-rating terms up to k.
Vector scores_for_item(const Parameters& params, const ModelConfig& config,
                       const Vector& h_top, int item);

// Precomputed per-hidden-state context for scoring many items cheaply.
struct ScoreContext {
  const Vector* h_top = nullptr;
  Vector factor_h;  // factored only: out_hidden_factor * h_top
};

ScoreContext make_score_context(const Parameters& params, const ModelConfig& config,
                                const Vector& h_top);
Vector scores_with_context(const Parameters& params, const ModelConfig& config,
                           const ScoreContext& ctx, int item);

// Softmax over the K scores, computed through the stable log form.
Vector softmax_conditional(std::span<const double> scores);

// sum_k k * p_k, clamped to [1, K].
double expected_rating(std::span<const double> probs);

// Expected rating of target_item conditioned on the full history. A history
// entry for the target itself is dropped (with a warning on stderr).
double predict_rating(const Parameters& params, const ModelConfig& config,
                      std::span<const ItemRating> history, int target_item);

// Model checkpoint. Binary layout (little-endian): magic "CFND", u32
// version, u32 basis, u32 num_items, u32 num_ratings, u32 hidden, u32
// layers, u32 rank, u32 share_ratings, u64 seed, f64 lambda, each parameter
// array in parameter_views order as f64, then a u64 FNV-1a checksum of every
// byte after the magic. Round-trips are bitwise exact.
struct Checkpoint {
  ModelConfig config;
  Basis basis = Basis::kUser;
  uint64_t seed = 0;
  double lambda = 1.0;
  Parameters params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a hash of the serialized header fields; identifies a configuration in
// logs and reports.
uint64_t config_hash(const Checkpoint& ckpt);

}  // namespace cfnade

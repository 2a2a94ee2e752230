#pragma once

#include <span>
#include <vector>

#include "cfnade/numeric.hpp"

namespace cfnade {

// Ordinal weight. 0 is the plain softmax NLL, 1 the pure ordinal cost,
// anything in between a convex mix of the two.
struct CostConfig {
  double lambda = 1.0;
};

struct CostResult {
  double cost = 0.0;
  Vector grad;  // d cost / d scores
};

// -log p(rating | scores) under the softmax conditional.
// Gradient is softmax(scores) - onehot(rating).
CostResult regular_nll(std::span<const double> scores, int rating);

struct OrdinalResult {
  double log_prob = 0.0;
  Vector grad;  // d log_prob / d scores
};

// Log of the ordinal conditional: the product of two listwise ranking
// likelihoods, one walking the scale from the true rating k down to 1 and
// one walking up to K, each factor a softmax over the remaining slice.
// The j = k factor appears in both walks. Unnormalized over k.
//
//   log p = sum_{j=1..k} (s_j - lse(s_1..s_j)) + sum_{j=k..K} (s_j - lse(s_j..s_K))
OrdinalResult ordinal_log_conditional(std::span<const double> scores, int rating);

// -ordinal_log_conditional, with the gradient negated.
CostResult ordinal_cost(std::span<const double> scores, int rating);

// (1 - lambda) * regular + lambda * ordinal. Endpoints short-circuit so
// lambda == 0 and lambda == 1 reproduce the pure costs exactly.
CostResult hybrid_cost(std::span<const double> scores, int rating, const CostConfig& cc);

// One sampled (ordering, split) training case: D rated entries, split
// position i in 1..D, and the score vector plus true rating for every
// suffix entry (positions >= i), all conditioned on the same prefix.
struct SplitCostInput {
  int num_rated = 0;           // D
  int split_pos = 1;           // i, 1-based
  std::vector<Vector> scores;  // one length-K vector per suffix entry
  std::vector<int> ratings;    // true rating per suffix entry
};

struct SplitCostResult {
  double cost = 0.0;
  std::vector<Vector> score_grads;  // per suffix entry, scaled like the cost
};

// Sum of per-entry costs over the suffix, scaled by D / (D - i + 1).
// The scale multiplies the gradients as well; it is part of the objective.
SplitCostResult split_cost(const SplitCostInput& input, const CostConfig& cc);

}  // namespace cfnade

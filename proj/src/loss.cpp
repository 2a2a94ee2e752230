#include "cfnade/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cfnade {

namespace {

void check_rating(std::span<const double> scores, int rating, const char* where) {
  if (scores.empty()) throw std::invalid_argument(std::string(where) + ": empty scores");
  if (rating < 1 || rating > static_cast<int>(scores.size())) {
    throw std::invalid_argument(std::string(where) + ": rating " + std::to_string(rating) +
                                " outside 1.." + std::to_string(scores.size()));
  }
}

}  // namespace

CostResult regular_nll(std::span<const double> scores, int rating) {
  check_rating(scores, rating, "regular_nll");
  Vector logp = log_softmax(scores);
  CostResult out;
  out.cost = -logp[rating - 1];
  out.grad.resize(scores.size());
  for (size_t t = 0; t < scores.size(); ++t) out.grad[t] = std::exp(logp[t]);
  out.grad[rating - 1] -= 1.0;
  return out;
}

OrdinalResult ordinal_log_conditional(std::span<const double> scores, int rating) {
  check_rating(scores, rating, "ordinal_log_conditional");
  const int K = static_cast<int>(scores.size());
  const int k = rating;

  OrdinalResult out;
  out.grad.assign(K, 0.0);

  // Downward walk: factors softmax(s_1..s_j) evaluated at j, for j = k..1.
  // Each factor contributes +1 to grad at j and -softmax over its slice.
  for (int j = k; j >= 1; --j) {
    double lse = log_sum_exp(scores.subspan(0, j));
    out.log_prob += scores[j - 1] - lse;
    out.grad[j - 1] += 1.0;
    for (int t = 0; t < j; ++t) out.grad[t] -= std::exp(scores[t] - lse);
  }
  // Upward walk: factors softmax(s_j..s_K) evaluated at j, for j = k..K.
  for (int j = k; j <= K; ++j) {
    double lse = log_sum_exp(scores.subspan(j - 1, K - j + 1));
    out.log_prob += scores[j - 1] - lse;
    out.grad[j - 1] += 1.0;
    for (int t = j - 1; t < K; ++t) out.grad[t] -= std::exp(scores[t] - lse);
  }
  return out;
}

CostResult ordinal_cost(std::span<const double> scores, int rating) {
  OrdinalResult lp = ordinal_log_conditional(scores, rating);
  CostResult out;
  out.cost = -lp.log_prob;
  out.grad = std::move(lp.grad);
  for (double& g : out.grad) g = -g;
  return out;
}

CostResult hybrid_cost(std::span<const double> scores, int rating, const CostConfig& cc) {
  if (cc.lambda < 0.0 || cc.lambda > 1.0) {
    throw std::invalid_argument("hybrid_cost: lambda must lie in [0, 1]");
  }
  if (cc.lambda == 0.0) return regular_nll(scores, rating);
  if (cc.lambda == 1.0) return ordinal_cost(scores, rating);

  CostResult reg = regular_nll(scores, rating);
  CostResult ord = ordinal_cost(scores, rating);
  CostResult out;
  out.cost = (1.0 - cc.lambda) * reg.cost + cc.lambda * ord.cost;
  out.grad.resize(scores.size());
  for (size_t t = 0; t < scores.size(); ++t) {
    out.grad[t] = (1.0 - cc.lambda) * reg.grad[t] + cc.lambda * ord.grad[t];
  }
  return out;
}

SplitCostResult split_cost(const SplitCostInput& input, const CostConfig& cc) {
  const int D = input.num_rated;
  const int i = input.split_pos;
  if (D < 1 || i < 1 || i > D) {
    throw std::invalid_argument("split_cost: split position " + std::to_string(i) +
                                " outside 1.." + std::to_string(D));
  }
  const size_t suffix = static_cast<size_t>(D - i + 1);
  if (input.scores.size() != suffix || input.ratings.size() != suffix) {
    throw std::invalid_argument("split_cost: expected " + std::to_string(suffix) +
                                " suffix entries, got " + std::to_string(input.scores.size()));
  }

  const double scale = static_cast<double>(D) / static_cast<double>(suffix);
  SplitCostResult out;
  out.score_grads.reserve(suffix);
  for (size_t s = 0; s < suffix; ++s) {
    CostResult c = hybrid_cost(input.scores[s], input.ratings[s], cc);
    out.cost += c.cost;
    for (double& g : c.grad) g *= scale;
    out.score_grads.push_back(std::move(c.grad));
  }
  out.cost *= scale;
  return out;
}

}  // namespace cfnade

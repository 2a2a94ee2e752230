#include "cfnade/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace cfnade {

void validate_config(const ModelConfig& config) {
  if (config.num_items < 1) throw std::invalid_argument("model config: num_items must be >= 1");
  if (config.num_ratings < 1) throw std::invalid_argument("model config: num_ratings must be >= 1");
  if (config.hidden < 1) throw std::invalid_argument("model config: hidden must be >= 1");
  if (config.layers < 1) throw std::invalid_argument("model config: layers must be >= 1");
  if (config.rank < 0) throw std::invalid_argument("model config: rank must be >= 0");
  if (config.factored() && (config.rank >= config.hidden || config.rank >= config.num_items)) {
    std::cerr << "warning: factor rank " << config.rank
              << " is not small relative to hidden=" << config.hidden
              << " items=" << config.num_items << "; the factored form saves nothing here\n";
  }
}

namespace {

void check_item(const ModelConfig& config, int item, const char* where) {
  if (item < 0 || item >= config.num_items) {
    throw std::invalid_argument(std::string(where) + ": item " + std::to_string(item) +
                                " outside 0.." + std::to_string(config.num_items - 1));
  }
}

void check_rating(const ModelConfig& config, int rating, const char* where) {
  if (rating < 1 || rating > config.num_ratings) {
    throw std::invalid_argument(std::string(where) + ": rating " + std::to_string(rating) +
                                " outside 1.." + std::to_string(config.num_ratings));
  }
}

template <typename Params, typename View>
std::vector<View> enumerate_views(Params& p) {
  std::vector<View> views;
  auto add = [&](std::string name, auto& array, bool weight, bool first) {
    views.push_back({std::move(name), &array, weight, first});
  };
  if (!p.in_weight.empty()) {
    for (size_t k = 0; k < p.in_weight.size(); ++k)
      add("in_weight[" + std::to_string(k) + "]", p.in_weight[k].data(), true, true);
    for (size_t k = 0; k < p.out_weight.size(); ++k)
      add("out_weight[" + std::to_string(k) + "]", p.out_weight[k].data(), true, false);
  } else {
    add("in_hidden_factor", p.in_hidden_factor.data(), true, true);
    for (size_t k = 0; k < p.in_item_factor.size(); ++k)
      add("in_item_factor[" + std::to_string(k) + "]", p.in_item_factor[k].data(), true, true);
    for (size_t k = 0; k < p.out_item_factor.size(); ++k)
      add("out_item_factor[" + std::to_string(k) + "]", p.out_item_factor[k].data(), true, false);
    add("out_hidden_factor", p.out_hidden_factor.data(), true, false);
  }
  for (size_t k = 0; k < p.score_bias.size(); ++k)
    add("score_bias[" + std::to_string(k) + "]", p.score_bias[k], false, false);
  add("hidden_bias", p.hidden_bias, false, true);
  for (size_t l = 0; l < p.deep_weight.size(); ++l) {
    add("deep_weight[" + std::to_string(l) + "]", p.deep_weight[l].data(), true, false);
    add("deep_bias[" + std::to_string(l) + "]", p.deep_bias[l], false, false);
  }
  return views;
}

}  // namespace

std::vector<ParamView> parameter_views(Parameters& p) {
  return enumerate_views<Parameters, ParamView>(p);
}

std::vector<ConstParamView> parameter_views(const Parameters& p) {
  return enumerate_views<const Parameters, ConstParamView>(p);
}

Parameters zero_parameters(const ModelConfig& config) {
  const int M = config.num_items, K = config.num_ratings, H = config.hidden;
  const int J = config.rank, L = config.layers;
  Parameters p;
  if (config.factored()) {
    p.in_hidden_factor = Matrix(H, J);
    p.out_hidden_factor = Matrix(J, H);
    p.in_item_factor.assign(K, Matrix(M, J));
    p.out_item_factor.assign(K, Matrix(M, J));
  } else {
    p.in_weight.assign(K, Matrix(M, H));
    p.out_weight.assign(K, Matrix(M, H));
  }
  p.score_bias.assign(K, Vector(M, 0.0));
  p.hidden_bias.assign(H, 0.0);
  p.deep_weight.assign(L - 1, Matrix(H, H));
  p.deep_bias.assign(L - 1, Vector(H, 0.0));
  return p;
}

Parameters init_parameters(const ModelConfig& config, Rng& rng) {
  validate_config(config);
  Parameters p = zero_parameters(config);
  // Draw order follows parameter_views order, row-major inside each array,
  // so a seed pins the full initialization.
  struct Block {
    std::vector<double>* values;
    int fan_sum;  // fan_in + fan_out
  };
  std::vector<Block> blocks;
  const int M = config.num_items, K = config.num_ratings, H = config.hidden, J = config.rank;
  if (config.factored()) {
    blocks.push_back({&p.in_hidden_factor.data(), H + J});
    for (int k = 0; k < K; ++k) blocks.push_back({&p.in_item_factor[k].data(), J + M});
    for (int k = 0; k < K; ++k) blocks.push_back({&p.out_item_factor[k].data(), M + J});
    blocks.push_back({&p.out_hidden_factor.data(), J + H});
  } else {
    for (int k = 0; k < K; ++k) blocks.push_back({&p.in_weight[k].data(), M + H});
    for (int k = 0; k < K; ++k) blocks.push_back({&p.out_weight[k].data(), H + M});
  }
  for (auto& dw : p.deep_weight) blocks.push_back({&dw.data(), H + H});
  for (const Block& b : blocks) {
    double limit = std::sqrt(6.0 / b.fan_sum);
    for (double& v : *b.values) v = rng.next_uniform(-limit, limit);
  }
  return p;
}

uint64_t parameter_count(const ModelConfig& config) {
  validate_config(config);
  const uint64_t M = config.num_items, K = config.num_ratings, H = config.hidden;
  const uint64_t J = config.rank, L = config.layers;
  uint64_t n = 0;
  if (config.factored()) {
    n += H * J + J * H;      // hidden-side factors
    n += 2 * K * M * J;      // per-rating item factors
  } else {
    n += 2 * K * M * H;      // in_weight + out_weight
  }
  n += K * M;                // score_bias
  n += H;                    // hidden_bias
  n += (L - 1) * (H * H + H);
  return n;
}

namespace {

// sum over t <= rating of the item's row in `mats`, written into out.
void accumulate_item_rows(const std::vector<Matrix>& mats, int item, int rating,
                          bool share_ratings, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (share_ratings) {
    for (int t = 0; t < rating; ++t) add_in_place(out, mats[t].row(item));
  } else {
    add_in_place(out, mats[rating - 1].row(item));
  }
}

}  // namespace

Vector effective_w_column(const Parameters& params, const ModelConfig& config, int item,
                          int rating) {
  check_item(config, item, "effective_w_column");
  check_rating(config, rating, "effective_w_column");
  if (config.factored()) {
    Vector factor_row(config.rank, 0.0);
    accumulate_item_rows(params.in_item_factor, item, rating, config.share_ratings, factor_row);
    Vector out(config.hidden, 0.0);
    matvec(params.in_hidden_factor, factor_row, out);
    return out;
  }
  Vector out(config.hidden, 0.0);
  accumulate_item_rows(params.in_weight, item, rating, config.share_ratings, out);
  return out;
}

ForwardTrace hidden_trace_from_prefix(const Parameters& params, const ModelConfig& config,
                                      std::span<const ItemRating> prefix) {
  std::vector<ItemRating> sorted(prefix.begin(), prefix.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ItemRating& a, const ItemRating& b) { return a.item < b.item; });
  for (size_t i = 0; i + 1 < sorted.size(); ++i) {
    if (sorted[i].item == sorted[i + 1].item) {
      throw std::invalid_argument("hidden_from_prefix: duplicate item " +
                                  std::to_string(sorted[i].item) + " in prefix");
    }
  }
  for (const auto& ir : sorted) {
    check_item(config, ir.item, "hidden_from_prefix");
    check_rating(config, ir.rating, "hidden_from_prefix");
  }

  ForwardTrace trace;
  Vector z = params.hidden_bias;
  if (config.factored()) {
    trace.factor_input_sum.assign(config.rank, 0.0);
    Vector row(config.rank, 0.0);
    for (const auto& ir : sorted) {
      accumulate_item_rows(params.in_item_factor, ir.item, ir.rating, config.share_ratings, row);
      add_in_place(trace.factor_input_sum, row);
    }
    Vector mixed(config.hidden, 0.0);
    matvec(params.in_hidden_factor, trace.factor_input_sum, mixed);
    add_in_place(z, mixed);
  } else {
    Vector row(config.hidden, 0.0);
    for (const auto& ir : sorted) {
      accumulate_item_rows(params.in_weight, ir.item, ir.rating, config.share_ratings, row);
      add_in_place(z, row);
    }
  }

  trace.layers.reserve(config.layers);
  trace.layers.push_back(tanh_activation(z));
  for (int l = 2; l <= config.layers; ++l) {
    Vector zl = params.deep_bias[l - 2];
    Vector wh(config.hidden, 0.0);
    matvec(params.deep_weight[l - 2], trace.layers.back(), wh);
    add_in_place(zl, wh);
    trace.layers.push_back(tanh_activation(zl));
  }
  return trace;
}

std::vector<Vector> hidden_from_prefix(const Parameters& params, const ModelConfig& config,
                                       std::span<const ItemRating> prefix) {
  return hidden_trace_from_prefix(params, config, prefix).layers;
}

ScoreContext make_score_context(const Parameters& params, const ModelConfig& config,
                                const Vector& h_top) {
  ScoreContext ctx;
  ctx.h_top = &h_top;
  if (config.factored()) {
    ctx.factor_h.assign(config.rank, 0.0);
    matvec(params.out_hidden_factor, h_top, ctx.factor_h);
  }
  return ctx;
}

Vector scores_with_context(const Parameters& params, const ModelConfig& config,
                           const ScoreContext& ctx, int item) {
  check_item(config, item, "scores_for_item");
  const int K = config.num_ratings;
  Vector scores(K);
  double running = 0.0;
  for (int k = 0; k < K; ++k) {
    double term = params.score_bias[k][item];
    if (config.factored()) {
      term += dot(params.out_item_factor[k].row(item), ctx.factor_h);
    } else {
      term += dot(params.out_weight[k].row(item), *ctx.h_top);
    }
    if (config.share_ratings) {
      running += term;
      scores[k] = running;
    } else {
      scores[k] = term;
    }
  }
  return scores;
}

Vector scores_for_item(const Parameters& params, const ModelConfig& config,
                       const Vector& h_top, int item) {
  ScoreContext ctx = make_score_context(params, config, h_top);
  return scores_with_context(params, config, ctx, item);
}

Vector softmax_conditional(std::span<const double> scores) {
  return softmax(scores);
}

double expected_rating(std::span<const double> probs) {
  double r = 0.0;
  for (size_t k = 0; k < probs.size(); ++k) r += static_cast<double>(k + 1) * probs[k];
  return std::clamp(r, 1.0, static_cast<double>(probs.size()));
}

double predict_rating(const Parameters& params, const ModelConfig& config,
                      std::span<const ItemRating> history, int target_item) {
  check_item(config, target_item, "predict_rating");
  std::vector<ItemRating> cleaned;
  cleaned.reserve(history.size());
  for (const auto& ir : history) {
    if (ir.item == target_item) {
      std::cerr << "warning: target item " << target_item
                << " present in history; dropping it for prediction\n";
      continue;
    }
    cleaned.push_back(ir);
  }
  std::vector<Vector> layers = hidden_from_prefix(params, config, cleaned);
  Vector scores = scores_for_item(params, config, layers.back(), target_item);
  Vector probs = softmax_conditional(scores);
  return expected_rating(probs);
}

// ---------------------------------------------------------------------------
// Checkpoint io

namespace {

constexpr uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

uint64_t fnv1a(uint64_t hash, const unsigned char* bytes, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    hash ^= bytes[i];
    hash *= kFnvPrime;
  }
  return hash;
}

class HashingWriter {
 public:
  explicit HashingWriter(std::ostream& os) : os_(os) {}

  void bytes(const void* p, size_t n) {
    os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    hash_ = fnv1a(hash_, static_cast<const unsigned char*>(p), n);
  }
  void u32(uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

  uint64_t hash() const { return hash_; }

 private:
  std::ostream& os_;
  uint64_t hash_ = kFnvOffset;
};

class HashingReader {
 public:
  HashingReader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}

  void bytes(void* p, size_t n) {
    if (!is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n))) {
      throw DataError(path_ + ": truncated checkpoint");
    }
    hash_ = fnv1a(hash_, static_cast<const unsigned char*>(p), n);
  }
  uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

  uint64_t hash() const { return hash_; }

 private:
  std::istream& is_;
  std::string path_;
  uint64_t hash_ = kFnvOffset;
};

constexpr uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out.write("CFND", 4);
  HashingWriter w(out);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<uint32_t>(ckpt.basis));
  w.u32(static_cast<uint32_t>(ckpt.config.num_items));
  w.u32(static_cast<uint32_t>(ckpt.config.num_ratings));
  w.u32(static_cast<uint32_t>(ckpt.config.hidden));
  w.u32(static_cast<uint32_t>(ckpt.config.layers));
  w.u32(static_cast<uint32_t>(ckpt.config.rank));
  w.u32(ckpt.config.share_ratings ? 1 : 0);
  w.u64(ckpt.seed);
  w.f64(ckpt.lambda);
  for (const auto& view : parameter_views(ckpt.params)) {
    for (double v : *view.values) w.f64(v);
  }
  // Trailing checksum, not hashed itself.
  uint64_t checksum = w.hash();
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(checksum >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
  if (!out) throw DataError("short write to checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "CFND", 4) != 0) {
    throw DataError(path + ": not a CFND checkpoint");
  }
  HashingReader r(in, path);
  uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  uint32_t basis = r.u32();
  if (basis > 1) throw DataError(path + ": bad basis field");
  ckpt.basis = static_cast<Basis>(basis);
  ckpt.config.num_items = static_cast<int>(r.u32());
  ckpt.config.num_ratings = static_cast<int>(r.u32());
  ckpt.config.hidden = static_cast<int>(r.u32());
  ckpt.config.layers = static_cast<int>(r.u32());
  ckpt.config.rank = static_cast<int>(r.u32());
  ckpt.config.share_ratings = r.u32() != 0;
  ckpt.seed = r.u64();
  ckpt.lambda = r.f64();
  validate_config(ckpt.config);
  ckpt.params = zero_parameters(ckpt.config);
  for (auto& view : parameter_views(ckpt.params)) {
    for (double& v : *view.values) v = r.f64();
  }
  uint64_t expected = r.hash();
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError(path + ": truncated checkpoint");
  uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<uint64_t>(b[i]) << (8 * i);
  if (stored != expected) throw DataError(path + ": checksum mismatch, file is corrupt");
  return ckpt;
}

uint64_t config_hash(const Checkpoint& ckpt) {
  uint64_t fields[8] = {static_cast<uint64_t>(ckpt.basis),
                        static_cast<uint64_t>(ckpt.config.num_items),
                        static_cast<uint64_t>(ckpt.config.num_ratings),
                        static_cast<uint64_t>(ckpt.config.hidden),
                        static_cast<uint64_t>(ckpt.config.layers),
                        static_cast<uint64_t>(ckpt.config.rank),
                        ckpt.config.share_ratings ? 1ULL : 0ULL,
                        std::bit_cast<uint64_t>(ckpt.lambda)};
  uint64_t h = kFnvOffset;
  for (uint64_t f : fields) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(f >> (8 * i));
    h = fnv1a(h, b, 8);
  }
  return h;
}

}  // namespace cfnade

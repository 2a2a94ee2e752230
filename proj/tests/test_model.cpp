#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "cfnade/model.hpp"
#include "oracle.hpp"
#include "testutil.hpp"

using namespace cfnade;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config(int items, int ratings, int hidden) {
  ModelConfig c;
  c.num_items = items;
  c.num_ratings = ratings;
  c.hidden = hidden;
  return c;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("effective_w_column basic lookup") {
  ModelConfig c = tiny_config(3, 2, 2);
  Parameters p = zero_parameters(c);
  p.in_weight[1](1, 0) = 0.1;
  p.in_weight[1](1, 1) = -0.4;
  Vector col = effective_w_column(p, c, 1, 2);
  CHECK(col == Vector{0.1, -0.4});
  CHECK_THROWS_AS(effective_w_column(p, c, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(effective_w_column(p, c, 0, 3), std::invalid_argument);
}

TEST_CASE("effective_w_column cumulative sharing") {
  ModelConfig c = tiny_config(2, 3, 2);
  c.share_ratings = true;
  Parameters p = zero_parameters(c);
  for (int k = 0; k < 3; ++k) {
    p.in_weight[k](0, 0) = 0.25;
    p.in_weight[k](0, 1) = -1.0;
  }
  Vector col = effective_w_column(p, c, 0, 3);
  CHECK(col[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(col[1] == doctest::Approx(-3.0).epsilon(1e-15));
}

TEST_CASE("effective_w_column factored identity mixer") {
  ModelConfig c = tiny_config(4, 2, 3);
  c.rank = 3;  // J = H, identity in_hidden_factor reproduces the item factor rows
  Parameters p = zero_parameters(c);
  for (int i = 0; i < 3; ++i) p.in_hidden_factor(i, i) = 1.0;
  p.in_item_factor[0](2, 0) = 0.5;
  p.in_item_factor[0](2, 2) = -0.25;
  Vector col = effective_w_column(p, c, 2, 1);
  CHECK(col == Vector{0.5, 0.0, -0.25});
}

TEST_CASE("hidden_from_prefix edge cases") {
  ModelConfig c = tiny_config(3, 2, 2);
  Parameters p = zero_parameters(c);

  std::vector<Vector> layers = hidden_from_prefix(p, c, {});
  CHECK(layers.size() == 1);
  CHECK(layers[0] == Vector{0.0, 0.0});

  p.hidden_bias = {0.3, -1.2};
  layers = hidden_from_prefix(p, c, {});
  CHECK(layers[0][0] == doctest::Approx(std::tanh(0.3)).epsilon(1e-15));
  CHECK(layers[0][1] == doctest::Approx(std::tanh(-1.2)).epsilon(1e-15));

  ModelConfig c1 = tiny_config(2, 1, 1);
  Parameters p1 = zero_parameters(c1);
  p1.in_weight[0](0, 0) = 0.5;
  std::vector<ItemRating> prefix{{0, 1}};
  layers = hidden_from_prefix(p1, c1, prefix);
  CHECK(layers[0][0] == doctest::Approx(0.46211715726000974).epsilon(1e-14));

  std::vector<ItemRating> dup{{1, 1}, {1, 2}};
  CHECK_THROWS_AS(hidden_from_prefix(p, c, dup), std::invalid_argument);
}

TEST_CASE("hidden_from_prefix is invariant to prefix order") {
  Rng rng(7);
  ModelConfig c = tiny_config(6, 5, 4);
  c.layers = 2;
  Parameters p = zero_parameters(c);
  oracle::randomize_parameters(p, rng, 0.5);

  std::vector<ItemRating> prefix{{4, 2}, {0, 5}, {2, 1}, {5, 3}};
  std::vector<Vector> base = hidden_from_prefix(p, c, prefix);
  for (int shuffle_round = 0; shuffle_round < 5; ++shuffle_round) {
    shuffle(rng, prefix);
    std::vector<Vector> other = hidden_from_prefix(p, c, prefix);
    CHECK(other == base);  // identical summation order inside
  }
}

TEST_CASE("scores_for_item cumulative structure under sharing") {
  ModelConfig c = tiny_config(2, 4, 3);
  c.share_ratings = true;
  Parameters p = zero_parameters(c);
  // all per-rating terms equal: score_k = k * v
  for (int k = 0; k < 4; ++k) p.score_bias[k][1] = 0.4;
  Vector h(3, 0.0);
  Vector s = scores_for_item(p, c, h, 1);
  for (int k = 0; k < 4; ++k) CHECK(s[k] == doctest::Approx(0.4 * (k + 1)).epsilon(1e-15));
}

TEST_CASE("scores_for_item forward differences recover per-rating terms") {
  Rng rng(19);
  ModelConfig c = tiny_config(5, 5, 6);
  c.share_ratings = true;
  Parameters p = zero_parameters(c);
  oracle::randomize_parameters(p, rng, 0.5);

  std::vector<ItemRating> prefix{{0, 2}, {3, 4}};
  Vector h = hidden_from_prefix(p, c, prefix).back();
  for (int item = 0; item < 5; ++item) {
    Vector s = scores_for_item(p, c, h, item);
    for (int k = 1; k < 5; ++k) {
      double term = p.score_bias[k][item] + dot(p.out_weight[k].row(item), h);
      CHECK(s[k] - s[k - 1] == doctest::Approx(term).epsilon(1e-12));
    }
  }
}

TEST_CASE("scores with zero hidden reduce to biases") {
  ModelConfig c = tiny_config(3, 4, 2);
  Parameters p = zero_parameters(c);
  for (int k = 0; k < 4; ++k) p.score_bias[k][2] = 0.1 * (k + 1);
  Vector h(2, 0.0);
  Vector s = scores_for_item(p, c, h, 2);
  for (int k = 0; k < 4; ++k) CHECK(s[k] == doctest::Approx(0.1 * (k + 1)).epsilon(1e-15));
}

TEST_CASE("factored model with identity factors matches the full model") {
  Rng rng(23);
  ModelConfig full = tiny_config(5, 3, 4);
  full.share_ratings = true;
  ModelConfig fact = full;
  fact.rank = full.hidden;

  Parameters pf = zero_parameters(fact);
  oracle::randomize_parameters(pf, rng, 0.5);
  for (int i = 0; i < fact.hidden; ++i) {
    for (int j = 0; j < fact.rank; ++j) {
      pf.in_hidden_factor(i, j) = i == j ? 1.0 : 0.0;
      pf.out_hidden_factor(j, i) = i == j ? 1.0 : 0.0;
    }
  }

  Parameters pw = zero_parameters(full);
  for (int k = 0; k < 3; ++k) {
    pw.in_weight[k].data() = pf.in_item_factor[k].data();
    pw.out_weight[k].data() = pf.out_item_factor[k].data();
    pw.score_bias[k] = pf.score_bias[k];
  }
  pw.hidden_bias = pf.hidden_bias;

  std::vector<ItemRating> prefix{{1, 3}, {4, 1}};
  Vector hf = hidden_from_prefix(pf, fact, prefix).back();
  Vector hw = hidden_from_prefix(pw, full, prefix).back();
  for (int i = 0; i < full.hidden; ++i) CHECK(hf[i] == doctest::Approx(hw[i]).epsilon(1e-14));
  for (int item = 0; item < 5; ++item) {
    Vector sf = scores_for_item(pf, fact, hf, item);
    Vector sw = scores_for_item(pw, full, hw, item);
    for (int k = 0; k < 3; ++k) CHECK(sf[k] == doctest::Approx(sw[k]).epsilon(1e-12));
  }
}

TEST_CASE("softmax_conditional basics") {
  Vector u = softmax_conditional(Vector(5, 2.2));
  for (double v : u) CHECK(v == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(softmax_conditional(Vector{9.0}) == Vector{1.0});
  Vector two = softmax_conditional(Vector{1.0, 2.0});
  CHECK(two[0] == doctest::Approx(0.2689414213699951).epsilon(1e-14));
  CHECK(two[1] == doctest::Approx(0.7310585786300049).epsilon(1e-14));
}

TEST_CASE("expected_rating and prediction bounds") {
  CHECK(expected_rating(Vector{0.0, 0.0, 0.0, 1.0, 0.0}) == 4.0);
  CHECK(expected_rating(Vector(5, 0.2)) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(expected_rating(Vector{0.1, 0.2, 0.3, 0.2, 0.2}) == doctest::Approx(3.2).epsilon(1e-14));

  Rng rng(31);
  ModelConfig c = tiny_config(6, 5, 4);
  Parameters p = zero_parameters(c);
  oracle::randomize_parameters(p, rng, 1.0);
  std::vector<ItemRating> history{{0, 1}, {2, 5}, {3, 2}};
  for (int item = 0; item < 6; ++item) {
    double r = predict_rating(p, c, history, item);
    CHECK(r >= 1.0);
    CHECK(r <= 5.0);
  }
  // empty history is allowed
  double cold = predict_rating(p, c, {}, 1);
  CHECK(cold >= 1.0);
  CHECK(cold <= 5.0);
}

TEST_CASE("predict_rating drops the target from the history") {
  Rng rng(37);
  ModelConfig c = tiny_config(4, 5, 3);
  Parameters p = zero_parameters(c);
  oracle::randomize_parameters(p, rng, 0.5);
  std::vector<ItemRating> with_target{{0, 3}, {1, 4}, {2, 2}};
  std::vector<ItemRating> without{{0, 3}, {2, 2}};
  CHECK(predict_rating(p, c, with_target, 1) == predict_rating(p, c, without, 1));
}

TEST_CASE("near one-hot conditional pins the prediction") {
  ModelConfig c = tiny_config(2, 5, 2);
  Parameters p = zero_parameters(c);
  p.score_bias[3][0] = 60.0;  // rating 4 dominates
  double r = predict_rating(p, c, {}, 0);
  CHECK(r == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("parameter_count reproduces the large-scale bookkeeping") {
  ModelConfig netflix = tiny_config(17770, 5, 500);
  CHECK(parameter_count(netflix) == 88850000ULL + 5ULL * 17770 + 500);

  ModelConfig factored = netflix;
  factored.rank = 50;
  double millions = static_cast<double>(parameter_count(factored)) / 1e6;
  CHECK(std::abs(millions - 9.02) / 9.02 < 0.01);

  ModelConfig unit = tiny_config(1, 1, 1);
  CHECK(parameter_count(unit) == 4);

  // counts always match the actual allocated array sizes
  Rng rng(5);
  for (ModelConfig c : {tiny_config(6, 5, 7), [] {
         ModelConfig f = tiny_config(6, 5, 7);
         f.rank = 3;
         f.layers = 2;
         return f;
       }()}) {
    Parameters p = zero_parameters(c);
    size_t actual = 0;
    for (const auto& view : parameter_views(p)) actual += view.values->size();
    CHECK(actual == parameter_count(c));
  }
}

TEST_CASE("init_parameters is seed-deterministic with zero biases") {
  ModelConfig c = tiny_config(6, 3, 5);
  c.layers = 2;
  Rng a(11), b(11), other(12);
  Parameters pa = init_parameters(c, a);
  Parameters pb = init_parameters(c, b);
  Parameters pc = init_parameters(c, other);
  CHECK(cfnade::test::flatten_parameters(pa) == cfnade::test::flatten_parameters(pb));
  CHECK(cfnade::test::flatten_parameters(pa) != cfnade::test::flatten_parameters(pc));
  for (double v : pa.hidden_bias) CHECK(v == 0.0);
  for (const auto& bias : pa.score_bias)
    for (double v : bias) CHECK(v == 0.0);
  double limit = std::sqrt(6.0 / (6 + 5));
  for (double v : pa.in_weight[0].data()) CHECK(std::abs(v) <= limit);
}

TEST_CASE("checkpoint round-trip is bitwise exact") {
  Rng rng(41);
  ModelConfig c = tiny_config(5, 4, 3);
  c.rank = 2;
  c.layers = 2;
  c.share_ratings = true;
  Checkpoint ckpt;
  ckpt.config = c;
  ckpt.basis = Basis::kItem;
  ckpt.seed = 99;
  ckpt.lambda = 0.5;
  ckpt.params = zero_parameters(c);
  oracle::randomize_parameters(ckpt.params, rng, 0.5);

  fs::path dir = fs::temp_directory_path() / "cfnade_model_tests";
  fs::create_directories(dir);
  fs::path p1 = dir / "a.cfnd";
  fs::path p2 = dir / "b.cfnd";
  save_checkpoint(p1.string(), ckpt);
  Checkpoint loaded = load_checkpoint(p1.string());
  CHECK(loaded.basis == ckpt.basis);
  CHECK(loaded.seed == ckpt.seed);
  CHECK(loaded.lambda == ckpt.lambda);
  CHECK(loaded.config.rank == c.rank);
  CHECK(cfnade::test::flatten_parameters(loaded.params) ==
        cfnade::test::flatten_parameters(ckpt.params));
  CHECK(config_hash(loaded) == config_hash(ckpt));

  save_checkpoint(p2.string(), loaded);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(b1.substr(0, 4) == "CFND");

  // flip one payload byte: the checksum must catch it
  std::string corrupted = b1;
  corrupted[corrupted.size() / 2] ^= 0x40;
  fs::path p3 = dir / "c.cfnd";
  std::ofstream(p3, std::ios::binary).write(corrupted.data(), corrupted.size());
  CHECK_THROWS_WITH_AS(load_checkpoint(p3.string()), doctest::Contains("checksum"), DataError);
}

}  // TEST_SUITE

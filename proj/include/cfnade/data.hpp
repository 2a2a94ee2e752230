#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfnade/numeric.hpp"

namespace cfnade {

// Bad input files, malformed config contents, dimension mismatches.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RatingTriple {
  int32_t user = 0;
  int32_t item = 0;
  int32_t rating = 0;     // 1..K
  int32_t timestamp = 0;  // retained, unused by training
};

inline bool operator==(const RatingTriple& a, const RatingTriple& b) {
  return a.user == b.user && a.item == b.item && a.rating == b.rating &&
         a.timestamp == b.timestamp;
}

struct ParsedRatings {
  std::vector<RatingTriple> triples;  // raw ids, ratings on 1..K
  int num_ratings = 0;                // K (10 when rescaled, else max observed)
  bool rescaled = false;
};

// Reads "user<sep>item<sep>rating<sep>timestamp" lines. With
// rescale_half_stars, ratings on the half-star 0.5..5.0 scale map to 2r on a
// 10-star integer scale; otherwise ratings must already be integers >= 1.
// Throws DataError with the line number on malformed input.
ParsedRatings parse_movielens(const std::string& path, const std::string& separator,
                              bool rescale_half_stars);

struct IdMap {
  std::vector<int32_t> to_raw;                     // dense index -> raw id
  std::unordered_map<int32_t, int32_t> to_dense;   // raw id -> dense index

  int32_t dense(int32_t raw) const {
    auto it = to_dense.find(raw);
    return it == to_dense.end() ? -1 : it->second;
  }
};

IdMap build_id_map(std::span<const int32_t> raw_ids_sorted_unique);

struct IndexedRatings {
  std::vector<RatingTriple> triples;  // dense 0-based user/item indices
  IdMap users;
  IdMap items;
  int num_ratings = 0;
  size_t duplicates_dropped = 0;
};

// Maps raw ids to dense 0-based indices (ascending raw-id order) and drops
// duplicate (user, item) pairs keeping the last occurrence.
IndexedRatings reindex(const ParsedRatings& parsed);

struct SplitSpec {
  double test_fraction = 0.10;
  double valid_fraction_of_train = 0.05;
  uint64_t seed = 0;
};

struct SplitTriples {
  std::vector<RatingTriple> train;
  std::vector<RatingTriple> valid;
  std::vector<RatingTriple> test;
};

// |test| = round(test_fraction * total); |valid| = round(valid_fraction *
// remaining). Deterministic in (triples, spec, rng seed). Partitions keep
// the original relative order within each part.
SplitTriples split_dataset(std::span<const RatingTriple> triples, const SplitSpec& spec,
                           Rng& rng);

enum class Basis : int32_t { kUser = 0, kItem = 1 };

inline const char* basis_name(Basis b) { return b == Basis::kUser ? "user" : "item"; }

// One (target, rating) observation inside an entity's list. "item" is the
// target index in the dataset's basis: movie for user-based data, user for
// item-based data.
struct ItemRating {
  int item = 0;
  int rating = 0;
};

struct Dataset {
  Basis basis = Basis::kUser;
  int num_entities = 0;
  int num_targets = 0;
  int num_ratings = 0;  // K
  std::vector<std::vector<ItemRating>> entries;  // per entity, sorted by target

  size_t total_ratings() const {
    size_t n = 0;
    for (const auto& e : entries) n += e.size();
    return n;
  }
};

// Buckets dense triples by entity. num_users/num_items are the global dims
// so that all partitions of one split share indices.
Dataset build_dataset(std::span<const RatingTriple> dense_triples, Basis basis,
                      int num_users, int num_items, int num_ratings);

// Swaps the roles of entities and targets; triples are preserved exactly and
// transpose(transpose(d)) == d.
Dataset transpose(const Dataset& d);

// Rating reported for targets with no training observations: the midpoint
// (1 + K) / 2, which is 3 on a 5-star scale.
double default_prediction(int num_ratings);

// Binary split cache, bit-exact across platforms. Layout (little-endian):
// magic "CFDS", u32 version, u32 basis, u32 num_users, u32 num_items,
// u32 num_ratings, u32 count, then count * (i32 user, i32 item, i32 rating,
// i32 timestamp).
struct RatingsCache {
  Basis basis = Basis::kUser;
  int num_users = 0;
  int num_items = 0;
  int num_ratings = 0;
  std::vector<RatingTriple> triples;
};

void write_ratings_cache(const std::string& path, const RatingsCache& cache);
RatingsCache read_ratings_cache(const std::string& path);

// Id maps persist as one raw id per line; the line number is the dense index.
void write_id_map(const std::string& path, const IdMap& map);
IdMap read_id_map(const std::string& path);

}  // namespace cfnade

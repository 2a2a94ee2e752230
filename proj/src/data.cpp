#include "cfnade/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace cfnade {

namespace {

std::vector<std::string> split_fields(const std::string& line, const std::string& sep) {
  std::vector<std::string> fields;
  size_t pos = 0;
  while (true) {
    size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return fields;
}

int64_t parse_int(const std::string& s, const char* what, size_t line_no) {
  size_t used = 0;
  int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
  if (used != s.size()) {
    throw DataError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& s, const char* what, size_t line_no) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
  if (used != s.size()) {
    throw DataError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
  return v;
}

void write_u32le(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32le(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError(path + ": truncated cache file");
  }
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

}  // namespace

ParsedRatings parse_movielens(const std::string& path, const std::string& separator,
                              bool rescale_half_stars) {
  if (separator.empty()) throw DataError("parse_movielens: empty separator");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ratings file '" + path + "'");

  ParsedRatings out;
  out.rescaled = rescale_half_stars;
  int max_rating = 0;
  bool saw_odd_rescaled = false;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_fields(line, separator);
    if (fields.size() != 4) {
      throw DataError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                      std::to_string(fields.size()));
    }
    RatingTriple t;
    t.user = static_cast<int32_t>(parse_int(fields[0], "user id", line_no));
    t.item = static_cast<int32_t>(parse_int(fields[1], "item id", line_no));
    if (t.user < 1 || t.item < 1) {
      throw DataError("line " + std::to_string(line_no) + ": ids must be >= 1");
    }
    if (rescale_half_stars) {
      double r = parse_real(fields[2], "rating", line_no);
      double doubled = r * 2.0;
      double rounded = std::round(doubled);
      if (std::abs(doubled - rounded) > 1e-9 || rounded < 1.0 || rounded > 10.0) {
        throw DataError("line " + std::to_string(line_no) + ": rating '" + fields[2] +
                        "' not on the 0.5..5.0 half-star scale");
      }
      t.rating = static_cast<int32_t>(rounded);
      if (t.rating % 2 == 1) saw_odd_rescaled = true;
    } else {
      int64_t r = parse_int(fields[2], "rating", line_no);
      if (r < 1) {
        throw DataError("line " + std::to_string(line_no) + ": rating " + std::to_string(r) +
                        " below 1");
      }
      if (r > 1000) {
        throw DataError("line " + std::to_string(line_no) + ": rating " + std::to_string(r) +
                        " implausibly large");
      }
      t.rating = static_cast<int32_t>(r);
    }
    t.timestamp = static_cast<int32_t>(parse_int(fields[3], "timestamp", line_no));
    max_rating = std::max(max_rating, t.rating);
    out.triples.push_back(t);
  }
  if (out.triples.empty()) throw DataError("ratings file '" + path + "' is empty");
  out.num_ratings = rescale_half_stars ? 10 : max_rating;
  if (rescale_half_stars && !saw_odd_rescaled) {
    std::cerr << "warning: --rescale-half-stars on a file with only whole-star ratings; "
                 "observed ratings are all even on the 10-star scale\n";
  }
  return out;
}

IdMap build_id_map(std::span<const int32_t> raw_ids_sorted_unique) {
  IdMap map;
  map.to_raw.assign(raw_ids_sorted_unique.begin(), raw_ids_sorted_unique.end());
  map.to_dense.reserve(map.to_raw.size());
  for (size_t i = 0; i < map.to_raw.size(); ++i) {
    map.to_dense.emplace(map.to_raw[i], static_cast<int32_t>(i));
  }
  return map;
}

IndexedRatings reindex(const ParsedRatings& parsed) {
  IndexedRatings out;
  out.num_ratings = parsed.num_ratings;

  std::set<int32_t> users, items;
  for (const auto& t : parsed.triples) {
    users.insert(t.user);
    items.insert(t.item);
  }
  std::vector<int32_t> user_ids(users.begin(), users.end());
  std::vector<int32_t> item_ids(items.begin(), items.end());
  out.users = build_id_map(user_ids);
  out.items = build_id_map(item_ids);

  // Keep the last occurrence of each (user, item) pair.
  std::unordered_map<int64_t, size_t> last_pos;
  last_pos.reserve(parsed.triples.size());
  for (size_t i = 0; i < parsed.triples.size(); ++i) {
    int64_t key = static_cast<int64_t>(parsed.triples[i].user) << 32 |
                  static_cast<uint32_t>(parsed.triples[i].item);
    last_pos[key] = i;
  }
  out.triples.reserve(last_pos.size());
  for (size_t i = 0; i < parsed.triples.size(); ++i) {
    const auto& t = parsed.triples[i];
    int64_t key = static_cast<int64_t>(t.user) << 32 | static_cast<uint32_t>(t.item);
    if (last_pos[key] != i) continue;
    RatingTriple d = t;
    d.user = out.users.dense(t.user);
    d.item = out.items.dense(t.item);
    out.triples.push_back(d);
  }
  out.duplicates_dropped = parsed.triples.size() - out.triples.size();
  if (out.duplicates_dropped > 0) {
    std::cerr << "warning: dropped " << out.duplicates_dropped
              << " duplicate (user, item) pairs, keeping the last occurrence\n";
  }
  return out;
}

SplitTriples split_dataset(std::span<const RatingTriple> triples, const SplitSpec& spec,
                           Rng& rng) {
  if (triples.size() < 20) {
    throw DataError("split_dataset: need at least 20 ratings, got " +
                    std::to_string(triples.size()));
  }
  if (spec.test_fraction <= 0.0 || spec.test_fraction >= 1.0 ||
      spec.valid_fraction_of_train <= 0.0 || spec.valid_fraction_of_train >= 1.0) {
    throw DataError("split_dataset: fractions must lie in (0, 1)");
  }
  const size_t total = triples.size();
  const size_t n_test = static_cast<size_t>(std::llround(spec.test_fraction * total));
  const size_t n_valid =
      static_cast<size_t>(std::llround(spec.valid_fraction_of_train * (total - n_test)));

  std::vector<int> order = sample_permutation(rng, static_cast<int>(total));
  // part per triple: 0 train, 1 valid, 2 test
  std::vector<unsigned char> part(total, 0);
  for (size_t i = 0; i < n_test; ++i) part[order[i]] = 2;
  for (size_t i = n_test; i < n_test + n_valid; ++i) part[order[i]] = 1;

  SplitTriples out;
  out.train.reserve(total - n_test - n_valid);
  out.valid.reserve(n_valid);
  out.test.reserve(n_test);
  for (size_t i = 0; i < total; ++i) {
    if (part[i] == 0) out.train.push_back(triples[i]);
    else if (part[i] == 1) out.valid.push_back(triples[i]);
    else out.test.push_back(triples[i]);
  }
  return out;
}

Dataset build_dataset(std::span<const RatingTriple> dense_triples, Basis basis,
                      int num_users, int num_items, int num_ratings) {
  Dataset d;
  d.basis = basis;
  d.num_entities = basis == Basis::kUser ? num_users : num_items;
  d.num_targets = basis == Basis::kUser ? num_items : num_users;
  d.num_ratings = num_ratings;
  d.entries.resize(d.num_entities);
  for (const auto& t : dense_triples) {
    int entity = basis == Basis::kUser ? t.user : t.item;
    int target = basis == Basis::kUser ? t.item : t.user;
    if (entity < 0 || entity >= d.num_entities || target < 0 || target >= d.num_targets) {
      throw DataError("build_dataset: triple (" + std::to_string(t.user) + ", " +
                      std::to_string(t.item) + ") outside dims " + std::to_string(num_users) +
                      "x" + std::to_string(num_items));
    }
    if (t.rating < 1 || t.rating > num_ratings) {
      throw DataError("build_dataset: rating " + std::to_string(t.rating) + " outside 1.." +
                      std::to_string(num_ratings));
    }
    d.entries[entity].push_back({target, t.rating});
  }
  for (auto& list : d.entries) {
    std::sort(list.begin(), list.end(),
              [](const ItemRating& a, const ItemRating& b) { return a.item < b.item; });
  }
  return d;
}

Dataset transpose(const Dataset& d) {
  Dataset t;
  t.basis = d.basis == Basis::kUser ? Basis::kItem : Basis::kUser;
  t.num_entities = d.num_targets;
  t.num_targets = d.num_entities;
  t.num_ratings = d.num_ratings;
  t.entries.resize(t.num_entities);
  for (int e = 0; e < d.num_entities; ++e) {
    for (const auto& ir : d.entries[e]) {
      t.entries[ir.item].push_back({e, ir.rating});
    }
  }
  for (auto& list : t.entries) {
    std::sort(list.begin(), list.end(),
              [](const ItemRating& a, const ItemRating& b) { return a.item < b.item; });
  }
  return t;
}

double default_prediction(int num_ratings) {
  if (num_ratings < 1) throw std::invalid_argument("default_prediction: K must be >= 1");
  return (1.0 + num_ratings) / 2.0;
}

void write_ratings_cache(const std::string& path, const RatingsCache& cache) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write cache file '" + path + "'");
  out.write("CFDS", 4);
  write_u32le(out, 1);  // format version
  write_u32le(out, static_cast<uint32_t>(cache.basis));
  write_u32le(out, static_cast<uint32_t>(cache.num_users));
  write_u32le(out, static_cast<uint32_t>(cache.num_items));
  write_u32le(out, static_cast<uint32_t>(cache.num_ratings));
  write_u32le(out, static_cast<uint32_t>(cache.triples.size()));
  for (const auto& t : cache.triples) {
    write_u32le(out, static_cast<uint32_t>(t.user));
    write_u32le(out, static_cast<uint32_t>(t.item));
    write_u32le(out, static_cast<uint32_t>(t.rating));
    write_u32le(out, static_cast<uint32_t>(t.timestamp));
  }
  if (!out) throw DataError("short write to cache file '" + path + "'");
}

RatingsCache read_ratings_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open cache file '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "CFDS", 4) != 0) {
    throw DataError(path + ": not a CFDS cache file");
  }
  uint32_t version = read_u32le(in, path);
  if (version != 1) {
    throw DataError(path + ": unsupported cache version " + std::to_string(version));
  }
  RatingsCache cache;
  uint32_t basis = read_u32le(in, path);
  if (basis > 1) throw DataError(path + ": bad basis field");
  cache.basis = static_cast<Basis>(basis);
  cache.num_users = static_cast<int>(read_u32le(in, path));
  cache.num_items = static_cast<int>(read_u32le(in, path));
  cache.num_ratings = static_cast<int>(read_u32le(in, path));
  uint32_t count = read_u32le(in, path);
  cache.triples.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    cache.triples[i].user = static_cast<int32_t>(read_u32le(in, path));
    cache.triples[i].item = static_cast<int32_t>(read_u32le(in, path));
    cache.triples[i].rating = static_cast<int32_t>(read_u32le(in, path));
    cache.triples[i].timestamp = static_cast<int32_t>(read_u32le(in, path));
  }
  return cache;
}

void write_id_map(const std::string& path, const IdMap& map) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write id map '" + path + "'");
  for (int32_t raw : map.to_raw) out << raw << "\n";
  if (!out) throw DataError("short write to id map '" + path + "'");
}

IdMap read_id_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open id map '" + path + "'");
  std::vector<int32_t> raw;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    raw.push_back(static_cast<int32_t>(parse_int(line, "raw id", line_no)));
  }
  IdMap map;
  map.to_raw = std::move(raw);
  map.to_dense.reserve(map.to_raw.size());
  for (size_t i = 0; i < map.to_raw.size(); ++i) {
    map.to_dense.emplace(map.to_raw[i], static_cast<int32_t>(i));
  }
  return map;
}

}  // namespace cfnade

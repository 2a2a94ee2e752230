#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "cfnade/data.hpp"
#include "synthetic.hpp"

using namespace cfnade;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  fs::path dir = fs::temp_directory_path() / "cfnade_data_tests";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& contents) {
  fs::path p = scratch_dir() / name;
  std::ofstream out(p);
  out << contents;
  return p;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("parse_movielens plain 5-star lines") {
  fs::path p = write_file("ml1m.dat",
                          "1::1193::5::978300760\n"
                          "1::661::3::978302109\n"
                          "2::1193::4::978298413\n");
  ParsedRatings parsed = parse_movielens(p.string(), "::", false);
  REQUIRE(parsed.triples.size() == 3);
  CHECK(parsed.triples[0] == RatingTriple{1, 1193, 5, 978300760});
  CHECK(parsed.num_ratings == 5);

  // tab-separated works through the separator argument
  fs::path tabbed = write_file("u.data", "3\t7\t2\t100\n4\t7\t5\t101\n");
  ParsedRatings tabs = parse_movielens(tabbed.string(), "\t", false);
  CHECK(tabs.triples.size() == 2);
  CHECK(tabs.num_ratings == 5);
}

TEST_CASE("parse_movielens half-star rescaling") {
  fs::path p = write_file("ml10m.dat",
                          "1::10::4.5::1\n"
                          "1::11::0.5::2\n"
                          "2::10::5.0::3\n");
  ParsedRatings parsed = parse_movielens(p.string(), "::", true);
  CHECK(parsed.num_ratings == 10);
  CHECK(parsed.triples[0].rating == 9);
  CHECK(parsed.triples[1].rating == 1);
  CHECK(parsed.triples[2].rating == 10);
}

TEST_CASE("parse_movielens error paths") {
  fs::path missing_field = write_file("bad1.dat", "1::2::3::4\n5::6::7\n");
  CHECK_THROWS_WITH_AS(parse_movielens(missing_field.string(), "::", false),
                       doctest::Contains("line 2"), DataError);

  fs::path bad_rating = write_file("bad2.dat", "1::2::0::4\n");
  CHECK_THROWS_AS(parse_movielens(bad_rating.string(), "::", false), DataError);

  fs::path off_scale = write_file("bad3.dat", "1::2::5.25::4\n");
  CHECK_THROWS_AS(parse_movielens(off_scale.string(), "::", true), DataError);

  fs::path empty = write_file("empty.dat", "");
  CHECK_THROWS_AS(parse_movielens(empty.string(), "::", false), DataError);

  CHECK_THROWS_AS(parse_movielens("/no/such/file", "::", false), DataError);
}

TEST_CASE("reindex densifies ids and keeps the last duplicate") {
  ParsedRatings parsed;
  parsed.num_ratings = 5;
  parsed.triples = {
      {10, 500, 4, 1}, {10, 7, 3, 2}, {99, 500, 1, 3}, {10, 500, 5, 4},  // dup of the first
  };
  IndexedRatings indexed = reindex(parsed);
  CHECK(indexed.duplicates_dropped == 1);
  REQUIRE(indexed.triples.size() == 3);
  CHECK(indexed.users.to_raw == std::vector<int32_t>{10, 99});
  CHECK(indexed.items.to_raw == std::vector<int32_t>{7, 500});
  // the surviving (10, 500) pair carries the later rating
  bool found = false;
  for (const auto& t : indexed.triples) {
    if (t.user == 0 && t.item == 1) {
      CHECK(t.rating == 5);
      found = true;
    }
  }
  CHECK(found);
  CHECK(indexed.users.dense(10) == 0);
  CHECK(indexed.users.dense(404) == -1);
}

TEST_CASE("split sizes follow the rounding rule") {
  std::vector<RatingTriple> triples;
  for (int i = 0; i < 100; ++i) triples.push_back({i / 10, i % 10, 1 + i % 5, i});
  Rng rng(1);
  SplitTriples s = split_dataset(triples, SplitSpec{}, rng);
  CHECK(s.test.size() == 10);
  CHECK(s.valid.size() == 5);  // round(0.05 * 90) = round(4.5)
  CHECK(s.train.size() == 85);

  // the MovieLens-1M count under the same rule
  const size_t total = 1000209;
  size_t n_test = static_cast<size_t>(std::llround(0.10 * total));
  CHECK(n_test == 100021);
}

TEST_CASE("split is deterministic and partitions the input") {
  cfnade::test::SyntheticSpec spec;
  spec.seed = 5;
  std::vector<RatingTriple> triples = cfnade::test::planted_ratings(spec);

  Rng r1(77), r2(77), r3(78);
  SplitTriples a = split_dataset(triples, SplitSpec{}, r1);
  SplitTriples b = split_dataset(triples, SplitSpec{}, r2);
  SplitTriples c = split_dataset(triples, SplitSpec{}, r3);
  CHECK(a.train == b.train);
  CHECK(a.valid == b.valid);
  CHECK(a.test == b.test);
  CHECK(a.test != c.test);

  CHECK(a.train.size() + a.valid.size() + a.test.size() == triples.size());

  CHECK_THROWS_AS(split_dataset(std::vector<RatingTriple>(5), SplitSpec{}, r1), DataError);
}

TEST_CASE("build_dataset and transpose") {
  std::vector<RatingTriple> triples{{0, 0, 3, 1}};
  Dataset d = build_dataset(triples, Basis::kUser, 1, 2, 5);
  REQUIRE(d.entries.size() == 1);
  REQUIRE(d.entries[0].size() == 1);
  CHECK(d.entries[0][0].item == 0);
  CHECK(d.entries[0][0].rating == 3);

  Dataset t = transpose(d);
  CHECK(t.basis == Basis::kItem);
  CHECK(t.num_entities == 2);
  CHECK(t.entries[0][0].item == 0);
  CHECK(t.entries[0][0].rating == 3);
  CHECK(t.entries[1].empty());
}

TEST_CASE("transpose is an involution and preserves rating mass") {
  cfnade::test::SyntheticSpec spec;
  spec.num_users = 12;
  spec.num_items = 9;
  spec.seed = 3;
  std::vector<RatingTriple> triples = cfnade::test::planted_ratings(spec);
  for (auto& t : triples) {
    t.user -= 1;
    t.item -= 1;
  }
  Dataset d = build_dataset(triples, Basis::kUser, 12, 9, 5);

  Dataset back = transpose(transpose(d));
  CHECK(back.basis == d.basis);
  CHECK(back.num_entities == d.num_entities);
  for (int e = 0; e < d.num_entities; ++e) {
    REQUIRE(back.entries[e].size() == d.entries[e].size());
    for (size_t i = 0; i < d.entries[e].size(); ++i) {
      CHECK(back.entries[e][i].item == d.entries[e][i].item);
      CHECK(back.entries[e][i].rating == d.entries[e][i].rating);
    }
  }

  long sum_d = 0, sum_t = 0;
  for (const auto& list : d.entries)
    for (const auto& ir : list) sum_d += ir.rating;
  Dataset t = transpose(d);
  for (const auto& list : t.entries)
    for (const auto& ir : list) sum_t += ir.rating;
  CHECK(sum_d == sum_t);
}

TEST_CASE("default_prediction midpoint rule") {
  CHECK(default_prediction(5) == 3.0);
  CHECK(default_prediction(1) == 1.0);
  CHECK(default_prediction(10) == 5.5);
  CHECK_THROWS_AS(default_prediction(0), std::invalid_argument);
}

TEST_CASE("ratings cache round-trips byte-identically") {
  cfnade::test::SyntheticSpec spec;
  spec.seed = 9;
  RatingsCache cache;
  cache.basis = Basis::kItem;
  cache.num_users = spec.num_users;
  cache.num_items = spec.num_items;
  cache.num_ratings = 5;
  for (auto t : cfnade::test::planted_ratings(spec)) {
    t.user -= 1;
    t.item -= 1;
    cache.triples.push_back(t);
  }

  fs::path p1 = scratch_dir() / "cache1.cfds";
  fs::path p2 = scratch_dir() / "cache2.cfds";
  write_ratings_cache(p1.string(), cache);
  RatingsCache loaded = read_ratings_cache(p1.string());
  CHECK(loaded.basis == cache.basis);
  CHECK(loaded.num_users == cache.num_users);
  CHECK(loaded.num_items == cache.num_items);
  CHECK(loaded.num_ratings == cache.num_ratings);
  CHECK(loaded.triples == cache.triples);

  write_ratings_cache(p2.string(), loaded);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(b1.substr(0, 4) == "CFDS");

  fs::path garbage = write_file("garbage.cfds", "not a cache");
  CHECK_THROWS_AS(read_ratings_cache(garbage.string()), DataError);
}

TEST_CASE("id map file round-trip") {
  IdMap map = build_id_map(std::vector<int32_t>{3, 17, 240});
  fs::path p = scratch_dir() / "ids.txt";
  write_id_map(p.string(), map);
  IdMap loaded = read_id_map(p.string());
  CHECK(loaded.to_raw == map.to_raw);
  CHECK(loaded.dense(17) == 1);
  CHECK(loaded.dense(99) == -1);
}

}  // TEST_SUITE

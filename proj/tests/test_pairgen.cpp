#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "rankiq/pairgen.hpp"

using namespace rankiq;

namespace {

// n single-source records with the given per-oracle score table.
Dataset scored_dataset(const std::vector<std::vector<double>>& scores,
                       const std::vector<std::string>& oracles) {
  std::vector<ImageRecord> records;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ImageRecord r;
    r.id = static_cast<int>(i);
    r.source_id = 0;
    r.distortion = i == 0 ? Distortion::pristine() : Distortion::white_noise();
    r.level = static_cast<int>(i);
    r.features = {0.0};
    r.oracle_scores = scores[i];
    records.push_back(r);
  }
  return make_dataset(std::move(records), oracles);
}

}  // namespace

TEST_CASE("uncertainty matches the raised-cosine values") {
  CHECK(uncertainty(0.0, 20.0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(uncertainty(10.0, 20.0) == Catch::Approx(0.5).margin(1e-12));
  CHECK(uncertainty(20.0, 20.0) == Catch::Approx(0.0).margin(1e-12));
  CHECK(uncertainty(25.0, 20.0) == 0.0);
  CHECK_THROWS_AS(uncertainty(-1.0, 20.0), Error);
  CHECK_THROWS_AS(uncertainty(1.0, 0.0), Error);
}

TEST_CASE("uncertainty is nonincreasing in the gap") {
  double prev = uncertainty(0.0, 20.0);
  for (int i = 1; i <= 1000; ++i) {
    const double t = 30.0 * i / 1000.0;
    const double u = uncertainty(t, 20.0);
    CHECK(u <= prev);
    prev = u;
  }
}

TEST_CASE("orient_pair follows unanimous preference") {
  const auto dip = orient_pair(7, 9, {50, 52, 55}, {30, 31, 35});
  REQUIRE(dip.has_value());
  CHECK(dip->better == 7);
  CHECK(dip->worse == 9);
  CHECK(dip->gap == 20.0);
  CHECK(dip->label == 1.0);

  const auto flipped = orient_pair(7, 9, {30, 31, 35}, {50, 52, 55});
  REQUIRE(flipped.has_value());
  CHECK(flipped->better == 9);
  CHECK(flipped->worse == 7);
  CHECK(flipped->gap == 20.0);
}

TEST_CASE("orient_pair drops disagreements and ties") {
  CHECK_FALSE(orient_pair(0, 1, {50, 30}, {40, 40}).has_value());
  CHECK_FALSE(orient_pair(0, 1, {42, 17}, {42, 17}).has_value());
  CHECK_FALSE(orient_pair(0, 1, {50, 40}, {40, 40}).has_value());
  CHECK_THROWS_WITH(orient_pair(0, 1, {1.0, 2.0}, {1.0}),
                    Catch::Matchers::ContainsSubstring("missing oracle"));
}

TEST_CASE("generate_dips enumerates all orientable pairs under a large budget") {
  const Dataset ds = scored_dataset({{90, 91}, {70, 72}, {50, 51}}, {"a", "b"});
  const auto dips = generate_dips(ds, 20.0, 0.0, 1000, 3);
  REQUIRE(dips.size() == 3);
  for (const auto& d : dips) {
    CHECK(d.gap > 0.0);
    CHECK(d.uncertainty == uncertainty(d.gap, 20.0));
  }
}

TEST_CASE("generate_dips is deterministic per seed") {
  Rng rng(40);
  std::vector<std::vector<double>> scores;
  for (int i = 0; i < 50; ++i) {
    scores.push_back({rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)});
  }
  const Dataset ds = scored_dataset(scores, {"a", "b"});
  const auto a = generate_dips(ds, 20.0, 0.0, 1000, 5);
  const auto b = generate_dips(ds, 20.0, 0.0, 1000, 5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].better == b[i].better);
    CHECK(a[i].worse == b[i].worse);
    CHECK(a[i].gap == b[i].gap);
  }
  const auto c = generate_dips(ds, 20.0, 0.0, 1000, 6);
  const bool same = a.size() == c.size() &&
                    std::equal(a.begin(), a.end(), c.begin(),
                               [](const Dip& x, const Dip& y) {
                                 return x.better == y.better && x.worse == y.worse;
                               });
  CHECK_FALSE(same);
}

TEST_CASE("every emitted pair is unanimously preferred and above T_min") {
  Rng rng(41);
  std::vector<std::vector<double>> scores;
  for (int i = 0; i < 40; ++i) {
    scores.push_back({rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0),
                      rng.uniform(0.0, 100.0)});
  }
  const Dataset ds = scored_dataset(scores, {"a", "b", "c"});
  const auto dips = generate_dips(ds, 20.0, 5.0, 100000, 11);
  REQUIRE(!dips.empty());
  for (const auto& d : dips) {
    CHECK(d.gap >= 5.0);
    double min_gap = 1e300;
    for (std::size_t m = 0; m < 3; ++m) {
      const double diff = ds.record(d.better).oracle_scores[m] -
                          ds.record(d.worse).oracle_scores[m];
      CHECK(diff > 0.0);
      min_gap = std::min(min_gap, diff);
    }
    CHECK(d.gap == min_gap);
  }
}

TEST_CASE("generate_dips respects the sampling budget") {
  Rng rng(42);
  std::vector<std::vector<double>> scores;
  for (int i = 0; i < 60; ++i) scores.push_back({rng.uniform(0.0, 100.0)});
  const Dataset ds = scored_dataset(scores, {"a"});
  const auto dips = generate_dips(ds, 20.0, 0.0, 100, 1);
  CHECK(dips.size() <= 100);
  CHECK_THROWS_WITH(generate_dips(ds, 20.0, 0.0, 0, 1),
                    Catch::Matchers::ContainsSubstring("budget"));
}

TEST_CASE("chain_dils joins pairs sharing a middle image and a bucket") {
  std::vector<Dip> dips{{1, 2, 30.0, 0.0, 1.0}, {2, 3, 30.0, 0.0, 1.0}};
  const auto dils = chain_dils(dips, 0.1, 100, 1);
  REQUIRE(dils.size() == 1);
  CHECK(dils[0].first == 1);
  CHECK(dils[0].second == 2);
  CHECK(dils[0].third == 3);
  CHECK(dils[0].uncertainty == 0.0);
}

TEST_CASE("chain_dils drops bucket mismatches and unrelated pairs") {
  std::vector<Dip> mismatch{{1, 2, 30.0, 0.0, 1.0}, {2, 3, 2.0, 0.9, 1.0}};
  CHECK(chain_dils(mismatch, 0.1, 100, 1).empty());

  std::vector<Dip> unrelated{{1, 2, 30.0, 0.0, 1.0}, {3, 4, 30.0, 0.0, 1.0}};
  CHECK(chain_dils(unrelated, 0.1, 100, 1).empty());

  CHECK_THROWS_AS(chain_dils({}, 0.1, 100, 1), Error);
  CHECK_THROWS_AS(chain_dils(mismatch, 0.0, 100, 1), Error);
  CHECK_THROWS_AS(chain_dils(mismatch, 0.1, 0, 1), Error);
}

TEST_CASE("lists transfer the larger constituent uncertainty") {
  std::vector<Dip> dips{{1, 2, 12.0, 0.61, 1.0}, {2, 3, 13.0, 0.64, 1.0}};
  const auto dils = chain_dils(dips, 0.05, 100, 1);
  REQUIRE(dils.size() == 1);
  CHECK(dils[0].uncertainty == 0.64);
}

TEST_CASE("every list decomposes into two present pairs of one bucket") {
  Rng rng(43);
  std::vector<std::vector<double>> scores;
  for (int i = 0; i < 30; ++i) scores.push_back({rng.uniform(0.0, 100.0)});
  const Dataset ds = scored_dataset(scores, {"a"});
  const auto dips = generate_dips(ds, 20.0, 0.0, 2000, 2);
  const double width = 0.05;
  const auto dils = chain_dils(dips, width, 500, 3);
  REQUIRE(!dils.empty());
  std::set<std::pair<int, int>> pair_set;
  std::map<std::pair<int, int>, double> pair_u;
  for (const auto& d : dips) {
    pair_set.insert({d.better, d.worse});
    pair_u[{d.better, d.worse}] = d.uncertainty;
  }
  for (const auto& l : dils) {
    CHECK(l.first != l.second);
    CHECK(l.second != l.third);
    CHECK(l.first != l.third);
    REQUIRE(pair_set.count({l.first, l.second}) == 1);
    REQUIRE(pair_set.count({l.second, l.third}) == 1);
    const double ua = pair_u[{l.first, l.second}];
    const double ub = pair_u[{l.second, l.third}];
    CHECK(std::floor(ua / width) == std::floor(ub / width));
    CHECK(l.uncertainty == std::max(ua, ub));
  }

  const auto again = chain_dils(dips, width, 500, 3);
  REQUIRE(again.size() == dils.size());
  for (std::size_t i = 0; i < dils.size(); ++i) {
    CHECK(again[i].first == dils[i].first);
    CHECK(again[i].second == dils[i].second);
    CHECK(again[i].third == dils[i].third);
  }
}

TEST_CASE("dips and dils survive a CSV round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "rankiq_pairgen_csv";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Rng rng(44);
  std::vector<std::vector<double>> scores;
  for (int i = 0; i < 20; ++i) scores.push_back({rng.uniform(0.0, 100.0)});
  const Dataset ds = scored_dataset(scores, {"a"});
  const auto dips = generate_dips(ds, 20.0, 0.0, 100, 9);
  const auto dils = chain_dils(dips, 0.05, 50, 9);

  save_dips(dips, (dir / "dips.csv").string());
  const auto dips_back = load_dips((dir / "dips.csv").string());
  REQUIRE(dips_back.size() == dips.size());
  for (std::size_t i = 0; i < dips.size(); ++i) {
    CHECK(dips_back[i].better == dips[i].better);
    CHECK(dips_back[i].worse == dips[i].worse);
    CHECK(dips_back[i].gap == dips[i].gap);
    CHECK(dips_back[i].uncertainty == dips[i].uncertainty);
    CHECK(dips_back[i].label == dips[i].label);
  }

  save_dils(dils, (dir / "dils.csv").string());
  const auto dils_back = load_dils((dir / "dils.csv").string());
  REQUIRE(dils_back.size() == dils.size());
  for (std::size_t i = 0; i < dils.size(); ++i) {
    CHECK(dils_back[i].first == dils[i].first);
    CHECK(dils_back[i].uncertainty == dils[i].uncertainty);
  }
}

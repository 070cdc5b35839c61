#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "ula/dataset.hpp"
#include "ula/generators.hpp"

using namespace ula;

TEST_CASE("colored bias rule: beta = (K-1)/K is the uniform point") {
  for (int y = 0; y < 10; ++y) {
    for (int z = 0; z < 10; ++z) {
      CHECK(colored_bias_prob(10, 0.9, y, z) == doctest::Approx(0.1));
    }
  }
}

TEST_CASE("colored task difficulty levels") {
  CHECK(kColoredDifficultyLevels ==
        std::array<double, 4>{0.005, 0.01, 0.02, 0.05});
}

TEST_CASE("colored generator: empirical diagonal frequency matches beta") {
  const size_t n = 50000;
  auto d = gen_colored_patterns(10, 0.01, n, 0.2, 123);
  size_t diag = 0;
  for (size_t i = 0; i < n; ++i) diag += d.y[i] == d.z[i];
  const double freq = static_cast<double>(diag) / n;
  CHECK(std::fabs(freq - 0.99) <= 0.005);
}

TEST_CASE("colored generator: conditional frequencies within 3 binomial sigma") {
  const int K = 10;
  const double beta = 0.05;
  const size_t n = 20000;
  auto d = gen_colored_patterns(K, beta, n, 0.2, 7);
  std::vector<size_t> count_y(K, 0);
  std::vector<size_t> count_yz(static_cast<size_t>(K) * K, 0);
  for (size_t i = 0; i < n; ++i) {
    count_y[d.y[i]]++;
    count_yz[static_cast<size_t>(d.y[i]) * K + d.z[i]]++;
  }
  for (int y = 0; y < K; ++y) {
    REQUIRE(count_y[y] > 0);
    for (int z = 0; z < K; ++z) {
      const double p = colored_bias_prob(K, beta, y, z);
      const double ny = static_cast<double>(count_y[y]);
      const double sigma = std::sqrt(p * (1 - p) / ny);
      const double freq = count_yz[static_cast<size_t>(y) * K + z] / ny;
      CHECK(std::fabs(freq - p) <= 3.0 * sigma + 1e-12);
    }
  }
}

TEST_CASE("colored generator: feature range and config errors") {
  auto d = gen_colored_patterns(4, 0.1, 100, 0.3, 5);
  for (float f : d.features) {
    CHECK(f >= 0.0f);
    CHECK(f <= 1.0f);
  }
  CHECK_THROWS_AS(gen_colored_patterns(4, -0.1, 100, 0.3, 5),
                  std::invalid_argument);
  CHECK_THROWS_AS(gen_colored_patterns(4, 1.5, 100, 0.3, 5),
                  std::invalid_argument);
}

TEST_CASE("same seed reproduces, different seed differs") {
  auto a = gen_colored_patterns(6, 0.02, 500, 0.25, 11);
  auto b = gen_colored_patterns(6, 0.02, 500, 0.25, 11);
  auto c = gen_colored_patterns(6, 0.02, 500, 0.25, 12);
  CHECK(a.features == b.features);
  CHECK(a.y == b.y);
  CHECK(a.z == b.z);
  CHECK(a.features != c.features);
}

TEST_CASE("glyph templates are pairwise distinct before tinting") {
  for (int a = 0; a < 10; ++a) {
    for (int b = a + 1; b < 10; ++b) {
      const auto ta = glyph_template(a);
      const auto tb = glyph_template(b);
      double l2 = 0;
      for (size_t i = 0; i < ta.size(); ++i) {
        l2 += (ta[i] - tb[i]) * (ta[i] - tb[i]);
      }
      CHECK(l2 > 0.0);
    }
  }
}

TEST_CASE("systematic pattern: row and column sums equal C exactly") {
  for (int C : {2, 3, 4, 5, 6}) {
    auto p = make_systematic_pattern(6, 6, C, 99 + C);
    for (int y = 0; y < 6; ++y) {
      int row = 0, col = 0;
      for (int z = 0; z < 6; ++z) {
        row += p.is_allowed(y, z);
        col += p.is_allowed(z, y);
      }
      CHECK(row == C);
      CHECK(col == C);
    }
  }
  CHECK(make_systematic_pattern(6, 6, 4, 1).in_distribution_cells() == 24);
  CHECK(make_systematic_pattern(6, 6, 6, 1).in_distribution_cells() == 36);
}

TEST_CASE("systematic pattern: invalid configurations are errors") {
  CHECK_THROWS_AS(make_systematic_pattern(6, 5, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_systematic_pattern(6, 6, 7, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_systematic_pattern(6, 6, 1, 1), std::invalid_argument);
}

TEST_CASE("systematic split: per-shape color frequencies and support") {
  const int K = 6, C = 3;
  auto split = gen_systematic_split(K, K, C, 30000, 2000, 3600, 0.2, 17);

  std::vector<size_t> count_y(K, 0);
  std::vector<size_t> count_yz(static_cast<size_t>(K) * K, 0);
  for (size_t i = 0; i < split.train.size(); ++i) {
    count_y[split.train.y[i]]++;
    count_yz[static_cast<size_t>(split.train.y[i]) * K + split.train.z[i]]++;
  }
  for (int y = 0; y < K; ++y) {
    for (int z = 0; z < K; ++z) {
      const double freq =
          static_cast<double>(count_yz[static_cast<size_t>(y) * K + z]) /
          static_cast<double>(count_y[y]);
      if (split.pattern.is_allowed(y, z)) {
        CHECK(std::fabs(freq - 1.0 / C) < 0.02);
      } else {
        CHECK(freq == 0.0);
      }
    }
  }
}

TEST_CASE("systematic split: test covers every cell, train/valid disjoint") {
  const int K = 6;
  auto split = gen_systematic_split(K, K, 3, 4000, 1000, 10 * K * K, 0.2, 23);
  std::vector<int> cell_count(K * K, 0);
  for (size_t i = 0; i < split.test.size(); ++i) {
    cell_count[split.test.y[i] * K + split.test.z[i]]++;
  }
  for (int c = 0; c < K * K; ++c) CHECK(cell_count[c] >= 1);

  // No identical feature vector appears in both train and valid.
  std::set<std::vector<float>> train_rows;
  for (size_t i = 0; i < split.train.size(); ++i) {
    auto x = split.train.x(i);
    train_rows.insert(std::vector<float>(x.begin(), x.end()));
  }
  for (size_t i = 0; i < split.valid.size(); ++i) {
    auto x = split.valid.x(i);
    CHECK(train_rows.find(std::vector<float>(x.begin(), x.end())) ==
          train_rows.end());
  }
}

TEST_CASE("C = L makes the test fully in-distribution") {
  auto split = gen_systematic_split(6, 6, 6, 600, 200, 720, 0.2, 29);
  CHECK(split.pattern.in_distribution_cells() == 36);
  for (size_t i = 0; i < split.test.size(); ++i) {
    CHECK(split.pattern.is_allowed(split.test.y[i], split.test.z[i]));
  }
}

TEST_CASE("empirical_group_table hand cases") {
  Dataset d;
  d.K = 2;
  d.L = 2;
  d.dim = 1;
  d.split = "train";
  d.features = {0, 0, 0, 0};
  d.y = {0, 0, 0, 1};
  d.z = {0, 0, 1, 1};
  auto t = empirical_group_table(d);
  CHECK(t.at(0, 0) == doctest::Approx(0.5));
  CHECK(t.at(0, 1) == doctest::Approx(0.25));
  CHECK(t.at(1, 0) == doctest::Approx(0.0));
  CHECK(t.at(1, 1) == doctest::Approx(0.25));

  Dataset single;
  single.K = 3;
  single.L = 3;
  single.dim = 1;
  single.features = {0};
  single.y = {0};
  single.z = {0};
  auto s = empirical_group_table(single);
  CHECK(s.at(0, 0) == 1.0);
  double total = 0;
  for (double v : t.data) total += v;
  CHECK(std::fabs(total - 1.0) < 1e-12);

  Dataset empty;
  empty.K = 2;
  empty.L = 2;
  CHECK_THROWS_AS(empirical_group_table(empty), std::invalid_argument);
}

TEST_CASE("empirical_group_table approaches uniform on balanced data") {
  auto d = gen_colored_patterns(5, 0.8, 40000, 0.1, 31);  // uniform point
  auto t = empirical_group_table(d);
  const double p = 1.0 / 25;
  const double sigma = std::sqrt(p * (1 - p) / 40000.0);
  for (double v : t.data) CHECK(std::fabs(v - p) <= 3 * sigma);
}

TEST_CASE("ULAD round-trip preserves everything") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "ula_ds_test";
  fs::create_directories(dir);
  const auto path = (dir / "t.ds").string();

  auto d = gen_colored_patterns(4, 0.1, 300, 0.3, 41, "valid");
  write_dataset(d, path);
  auto r = read_dataset(path);
  CHECK(r.K == d.K);
  CHECK(r.L == d.L);
  CHECK(r.split == "valid");
  CHECK(r.provenance.generator == d.provenance.generator);
  CHECK(r.provenance.seed == d.provenance.seed);
  CHECK(r.features == d.features);
  CHECK(r.y == d.y);
  CHECK(r.z == d.z);

  // Rewriting the loaded dataset is byte-identical.
  const auto path2 = (dir / "t2.ds").string();
  write_dataset(r, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string c1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string c2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(c1 == c2);
  fs::remove_all(dir);
}

TEST_CASE("ULAD rejects corrupted magic and truncation as format errors") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "ula_ds_bad";
  fs::create_directories(dir);
  const auto path = (dir / "bad.ds").string();

  auto d = gen_colored_patterns(3, 0.1, 20, 0.1, 43);
  write_dataset(d, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(read_dataset(path), std::runtime_error);

  write_dataset(d, path);
  fs::resize_file(path, fs::file_size(path) - 5);
  CHECK_THROWS_AS(read_dataset(path), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("ULAD 1e5-sample file reads back quickly") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "ula_ds_big";
  fs::create_directories(dir);
  const auto path = (dir / "big.ds").string();
  auto d = gen_colored_patterns(10, 0.05, 100000, 0.2, 47);
  write_dataset(d, path);

  const auto start = std::chrono::steady_clock::now();
  auto r = read_dataset(path);
  const auto elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  CHECK(r.size() == 100000);
  MESSAGE("read 1e5-sample dataset in ", elapsed, " s");
  CHECK(elapsed < 3.0);
  fs::remove_all(dir);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "pimc/metrics.hpp"
#include "tempdir.hpp"

using namespace pimc;

namespace {

double brute_balanced(const std::vector<std::int32_t>& t, const std::vector<std::int32_t>& p, int k) {
  double sum = 0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    int hit = 0, n = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] == c) {
        ++n;
        hit += p[i] == c;
      }
    if (n == 0) continue;
    sum += double(hit) / n;
    ++present;
  }
  return sum / present;
}

}  // namespace

TEST_CASE("balanced accuracy equals the mean per-class recall") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + trial % 5;
    std::uniform_int_distribution<int> d(0, k - 1);
    std::vector<std::int32_t> t(200), p(200);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = d(rng);
      p[i] = std::bernoulli_distribution(0.6)(rng) ? t[i] : d(rng);
    }
    std::vector<std::int32_t> classes(k);
    std::iota(classes.begin(), classes.end(), 0);
    const auto m = classification_metrics(t, p, classes);
    CHECK(m.balanced_accuracy == doctest::Approx(brute_balanced(t, p, k)).epsilon(1e-12));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < t.size(); ++i) hits += t[i] == p[i];
    CHECK(m.accuracy == doctest::Approx(double(hits) / 200));
  }
}

TEST_CASE("perfect predictions score one regardless of imbalance") {
  std::vector<std::int32_t> t{0, 0, 0, 0, 0, 0, 0, 0, 1, 2};
  const auto m = classification_metrics(t, t, {0, 1, 2});
  CHECK(m.accuracy == 1.0);
  CHECK(m.balanced_accuracy == 1.0);
  CHECK(m.macro_f1 == 1.0);
  CHECK(m.confusion[0][0] == 8);
  CHECK(m.support == std::vector<std::size_t>{8, 1, 1});
}

TEST_CASE("majority guessing is exposed by balanced accuracy") {
  std::vector<std::int32_t> t{0, 0, 0, 0, 0, 0, 0, 0, 1, 1}, p(10, 0);
  const auto m = classification_metrics(t, p, {0, 1});
  CHECK(m.accuracy == doctest::Approx(0.8));
  CHECK(m.balanced_accuracy == doctest::Approx(0.5));
  // F1: class 0 = 2*0.8*1/(1.8), class 1 = 0
  CHECK(m.macro_f1 == doctest::Approx(0.5 * (1.6 / 1.8)));
}

TEST_CASE("macro F1 is invariant under relabeling") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> d(0, 3);
  std::vector<std::int32_t> t(150), p(150);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = d(rng);
    p[i] = std::bernoulli_distribution(0.5)(rng) ? t[i] : d(rng);
  }
  const double f1 = classification_metrics(t, p, {0, 1, 2, 3}).macro_f1;
  std::vector<std::int32_t> perm{0, 1, 2, 3};
  do {
    std::vector<std::int32_t> t2(t.size()), p2(p.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      t2[i] = perm[t[i]] + 10;
      p2[i] = perm[p[i]] + 10;
    }
    CHECK(classification_metrics(t2, p2, {10, 11, 12, 13}).macro_f1 == doctest::Approx(f1).epsilon(1e-12));
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("regression metrics") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> a(100), b(100);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    const auto m = regression_metrics("x", a, b);
    CHECK(std::abs(m.rmse * m.rmse - m.mse) <= 1e-9);
    double mae = 0;
    for (std::size_t i = 0; i < 100; ++i) mae += std::abs(double(a[i]) - b[i]);
    CHECK(m.mae == doctest::Approx(mae / 100).epsilon(1e-12));
  }
  std::vector<float> zero(4, 0.0f), target{1, -2, 3, -4};
  CHECK(regression_metrics("z", zero, target).mae == doctest::Approx(2.5));
}

TEST_CASE("reports round trip and rank deterministically") {
  testing::TempDir dir("reports");
  MetricsReport a;
  a.task = "pixel-cls";
  a.mode = "frozen";
  a.run = "a";
  a.samples = 10;
  a.classification = classification_metrics(std::vector<std::int32_t>{0, 1, 1}, std::vector<std::int32_t>{0, 1, 0},
                                            {0, 1});
  MetricsReport b = a;
  b.run = "b";
  b.mode = "finetune";
  b.classification = classification_metrics(std::vector<std::int32_t>{0, 1, 1}, std::vector<std::int32_t>{0, 1, 1},
                                            {0, 1});
  MetricsReport c = a;
  c.run = "c";
  MetricsReport f;
  f.task = "forecast";
  f.mode = "frozen";
  f.run = "f";
  f.regression.push_back({"overall", 0.1, 0.02, std::sqrt(0.02), 5});
  MetricsReport g = f;
  g.run = "g";
  g.regression[0].mae = 0.05;

  write_report_json(a, dir / "a.json");
  const auto back = read_report_json(dir / "a.json");
  CHECK(report_json(back) == report_json(a));
  write_report_json(f, dir / "f.json");
  CHECK(report_json(read_report_json(dir / "f.json")) == report_json(f));

  const auto rows = compare_runs({c, f, a, g, b});
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].task == "forecast");
  CHECK(rows[0].run == "g");
  CHECK(rows[0].rank == 1);
  CHECK(rows[1].run == "f");
  CHECK(rows[2].run == "b");
  CHECK(rows[3].run == "a");  // tie with c, broken by name
  CHECK(rows[4].run == "c");
  CHECK(compare_runs({a, b, c, f, g}).size() == 5);
  write_ranking_csv(rows, dir / "r1.csv");
  write_ranking_csv(compare_runs({g, c, b, a, f}), dir / "r2.csv");
  std::ifstream r1(dir / "r1.csv"), r2(dir / "r2.csv");
  CHECK(std::string(std::istreambuf_iterator<char>(r1), {}) == std::string(std::istreambuf_iterator<char>(r2), {}));
}

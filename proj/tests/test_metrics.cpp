#include <catch_amalgamated.hpp>

#include <chrono>
#include <fstream>

#include "riskminer/errors.hpp"
#include "riskminer/metrics.hpp"
#include "test_support.hpp"

using namespace riskminer;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double missing = 0.1) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform() < missing ? kMissing : rng.normal();
  return m;
}

struct RefReport {
  double ic = 0, rank_ic = 0, icir = 0, rank_icir = 0;
  std::size_t days = 0;
};

// Per-day textbook formulas over jointly present tradable cells.
RefReport reference(const Matrix& a, const Matrix& b, std::span<const std::uint8_t> tradable) {
  std::vector<double> ics, rics;
  for (std::size_t d = 0; d < a.cols(); ++d) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      if (is_missing(a(i, d)) || is_missing(b(i, d))) continue;
      if (!tradable.empty() && !tradable[i * a.cols() + d]) continue;
      x.push_back(a(i, d));
      y.push_back(b(i, d));
    }
    if (x.size() < 2) continue;
    const double ic = rmtest::ref_pearson(x, y);
    if (!std::isfinite(ic)) continue;
    ics.push_back(ic);
    rics.push_back(rmtest::ref_pearson(rmtest::ref_ranks(x), rmtest::ref_ranks(y)));
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto sd = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
  };
  RefReport r;
  r.days = ics.size();
  r.ic = mean(ics);
  r.rank_ic = mean(rics);
  r.icir = r.ic / sd(ics);
  r.rank_icir = r.rank_ic / sd(rics);
  return r;
}

}  // namespace

TEST_CASE("perfect and inverse correlation") {
  Rng rng(1);
  const Matrix a = random_matrix(8, 12, rng, 0.0);
  Matrix neg = a;
  for (double& v : neg.data()) v = -v;
  const auto same = compute_ic(a, a, {0, 12});
  CHECK(same.ic == Catch::Approx(1.0).margin(1e-12));
  CHECK(same.rank_ic == Catch::Approx(1.0).margin(1e-12));
  CHECK(compute_ic(a, neg, {0, 12}).ic == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("three-stock ranking example") {
  Matrix alpha(3, 1), target(3, 1);
  alpha(0, 0) = 0.1;
  alpha(1, 0) = 0.2;
  alpha(2, 0) = 0.3;
  target(0, 0) = 0.3;
  target(1, 0) = 0.2;
  target(2, 0) = 0.1;
  CHECK(average_ranks(std::vector<double>{0.1, 0.2, 0.3}) == std::vector<double>{1, 2, 3});
  const auto r = compute_ic(alpha, target, {0, 1});
  CHECK(r.ic == Catch::Approx(-1.0).margin(1e-12));
  CHECK(r.rank_ic == Catch::Approx(-1.0).margin(1e-12));
  CHECK(average_ranks(std::vector<double>{5, 1, 5, 2}) == std::vector<double>{3.5, 1, 3.5, 2});
}

TEST_CASE("metrics match textbook formulas") {
  Rng rng(5);
  const auto start = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(10, 50, rng);
    const Matrix b = random_matrix(10, 50, rng);
    std::vector<std::uint8_t> tradable(500);
    for (auto& t : tradable) t = rng.uniform() < 0.9;
    const RefReport ref = reference(a, b, tradable);
    const MetricReport got = compute_ic(a, b, {0, 50}, tradable);
    REQUIRE(got.per_day.size() == ref.days);
    CHECK(std::fabs(got.ic - ref.ic) <= 1e-12);
    CHECK(std::fabs(got.rank_ic - ref.rank_ic) <= 1e-12);
    CHECK(std::fabs(got.icir - ref.icir) <= 1e-12 * std::max(1.0, std::fabs(ref.icir)));
    CHECK(std::fabs(got.rank_icir - ref.rank_icir) <= 1e-12 * std::max(1.0, std::fabs(ref.rank_icir)));
    for (const auto& d : got.per_day) {
      CHECK(d.ic >= -1.0);
      CHECK(d.ic <= 1.0);
    }
    const RefReport mut = reference(a, b, {});
    CHECK(std::fabs(compute_mut_ic(a, b, {0, 50}) - mut.ic) <= 1e-12);
    CHECK(compute_mut_ic(a, b, {0, 50}) == compute_mut_ic(b, a, {0, 50}));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 1.0);
}

TEST_CASE("mutual IC of affine copies") {
  Rng rng(8);
  const Matrix a = random_matrix(5, 20, rng, 0.0);
  Matrix b = a;
  for (double& v : b.data()) v = 2 * v + 3;
  CHECK(compute_mut_ic(a, a, {0, 20}) == Catch::Approx(1.0).margin(1e-12));
  CHECK(compute_mut_ic(a, b, {0, 20}) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("affine and monotone invariance") {
  Rng rng(9);
  const Matrix a = random_matrix(10, 30, rng);
  const Matrix t = random_matrix(10, 30, rng);
  Matrix scaled = a, flipped = a, cubed = a;
  for (double& v : scaled.data()) v = 3 * v - 1;
  for (double& v : flipped.data()) v = -0.5 * v + 2;
  for (double& v : cubed.data()) v = v * v * v + v;
  const auto base = compute_ic(a, t, {0, 30});
  CHECK(compute_ic(scaled, t, {0, 30}).ic == Catch::Approx(base.ic).margin(1e-12));
  CHECK(compute_ic(flipped, t, {0, 30}).ic == Catch::Approx(-base.ic).margin(1e-12));
  CHECK(compute_ic(cubed, t, {0, 30}).rank_ic == Catch::Approx(base.rank_ic).margin(1e-12));
}

TEST_CASE("metrics only touch the requested range") {
  Rng rng(10);
  const Matrix a = random_matrix(6, 20, rng, 0.0);
  const Matrix t = random_matrix(6, 20, rng, 0.0);
  Matrix poisoned = a;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t d = 10; d < 20; ++d) poisoned(i, d) = rng.normal() * 100;
  }
  CHECK(compute_ic(a, t, {0, 10}).ic == compute_ic(poisoned, t, {0, 10}).ic);
  for (const auto& d : compute_ic(a, t, {3, 7}).per_day) {
    CHECK(d.day >= 3);
    CHECK(d.day < 7);
  }
}

TEST_CASE("no qualifying day") {
  Matrix a(3, 4, 1.0);  // constant cross-sections
  Rng rng(3);
  const Matrix t = random_matrix(3, 4, rng, 0.0);
  CHECK_THROWS_AS(compute_ic(a, t, {0, 4}), EmptyOverlap);
  Matrix sparse(3, 4);
  CHECK_THROWS_AS(compute_ic(sparse, t, {0, 4}), EmptyOverlap);
  CHECK(std::isnan(pearson(std::vector<double>{1.0}, std::vector<double>{2.0})));
}

TEST_CASE("summary json and csv") {
  Rng rng(4);
  const Matrix a = random_matrix(5, 10, rng, 0.0);
  const Matrix t = random_matrix(5, 10, rng, 0.0);
  const auto r = compute_ic(a, t, {0, 10});
  const std::string json = metric_summary_json(r);
  for (const char* key : {"\"ic\"", "\"icir\"", "\"rank_ic\"", "\"rank_icir\"", "\"days\""}) {
    CHECK(json.find(key) != std::string::npos);
  }
  const auto path = std::filesystem::temp_directory_path() / "riskminer_metric.csv";
  write_metric_csv(r, rmtest::iso_dates(10), path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "date,ic,rank_ic");
}

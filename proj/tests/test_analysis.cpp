#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "gpert/analysis.hpp"
#include "gpert/error.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace gpert;

namespace {

std::vector<std::vector<double>> random_rows(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (auto& r : rows)
    for (auto& x : r) x = nd(rng);
  return rows;
}

double column_variance(const Matrix& m, std::size_t c) {
  double mean = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) mean += m(r, c) / m.rows();
  double ss = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) ss += (m(r, c) - mean) * (m(r, c) - mean);
  return ss / (m.rows() - 1);
}

ScoreRecord rec(const std::string& id, const std::string& cond, double v, int variant = 0) {
  return {id, cond, variant, "bleu", v, "m"};
}

}  // namespace

TEST_CASE("pca variances match the jacobi oracle") {
  std::mt19937_64 rng(5);
  for (auto [n, d] : {std::pair<std::size_t, std::size_t>{5, 10}, {50, 10}, {30, 4}}) {
    const auto rows = random_rows(rng, n, d);
    const auto eig = oracle::jacobi(oracle::covariance(rows));
    const Matrix m = Matrix::from_rows(rows);
    const auto model = pca_fit(m, 3);
    const auto proj = pca_project(model, m);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::abs(model.explained_variance[c] - eig.values[c]) < 1e-8);
      CHECK(std::abs(column_variance(proj, c) - eig.values[c]) < 1e-8);
      // Same direction as the oracle's eigenvector up to sign.
      CHECK(std::abs(std::abs(oracle::dot(model.components[c], eig.vectors[c])) - 1.0) < 1e-6);
    }
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b)
        CHECK(std::abs(oracle::dot(model.components[a], model.components[b]) - (a == b ? 1.0 : 0.0)) < 1e-8);
    CHECK(model.explained_variance[0] >= model.explained_variance[1]);
    CHECK(model.explained_variance[1] >= model.explained_variance[2]);
  }
}

TEST_CASE("pca sign convention and rank-one data") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 20; ++i) {
    const double t = i * 0.37 - 3;
    rows.push_back({t, -2 * t, 0.5 * t, 0.0, 3 * t});
  }
  const auto model = pca_fit(Matrix::from_rows(rows), 1);
  CHECK(model.explained_variance[0] / model.total_variance >= 0.99999);
  const auto& c = model.components[0];
  CHECK(c[0] > 0);
}

TEST_CASE("pca round trip and mean projection") {
  std::mt19937_64 rng(6);
  const auto rows = random_rows(rng, 12, 4);
  const Matrix m = Matrix::from_rows(rows);
  const auto model = pca_fit(m, 4);
  double explained = 0;
  for (double v : model.explained_variance) explained += v;
  CHECK(std::abs(explained - model.total_variance) < 1e-8);
  const auto back = pca_reconstruct(model, pca_project(model, m));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) CHECK(std::abs(back(r, c) - m(r, c)) < 1e-8);
  const auto origin = pca_project(model, Matrix::from_rows({model.mean}));
  for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(origin(0, c)) < 1e-10);
}

TEST_CASE("pca preconditions") {
  CHECK_THROWS_AS(pca_fit(Matrix::from_rows({{1, 2}}), 1), Error);
  CHECK_THROWS_AS(pca_fit(Matrix::from_rows({{1, 2}, {3, 4}}), 2), Error);
  CHECK_THROWS_AS(pca_fit(Matrix::from_rows({{1, 2}, {1, 2}, {1, 2}}), 1), Error);
  const auto model = pca_fit(Matrix::from_rows({{1, 2}, {3, 5}, {0, 1}}), 1);
  CHECK_THROWS_AS(pca_project(model, Matrix::from_rows({{1, 2, 3}})), Error);
  CHECK_THROWS_AS(Matrix::from_rows({{1, 2}, {3}}), Error);
}

TEST_CASE("hdbscan finds three direction bundles") {
  const auto data = synthetic::direction_bundles(20, 0.05, 17);
  const auto labels = hdbscan_cluster(Matrix::from_rows(data.points), {5});
  CHECK(labels.k == 3);
  CHECK(synthetic::pair_agreement(labels.labels, data.truth) >= 0.95);
  for (auto size : labels.cluster_sizes()) CHECK(size >= 5);
  CHECK(labels.noise_fraction() < 0.1);
}

TEST_CASE("hdbscan labels survive a shuffle of the rows") {
  const auto data = synthetic::direction_bundles(20, 0.05, 18);
  const auto base = hdbscan_cluster(Matrix::from_rows(data.points), {5});
  std::vector<std::size_t> perm(data.points.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(3);
  for (int round = 0; round < 5; ++round) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<double>> shuffled;
    for (auto p : perm) shuffled.push_back(data.points[p]);
    const auto got = hdbscan_cluster(Matrix::from_rows(shuffled), {5});
    std::vector<int> back(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) back[perm[i]] = got.labels[i];
    CHECK(synthetic::equal_up_to_bijection(base.labels, back));
  }
}

TEST_CASE("hdbscan degenerate and invalid inputs") {
  std::vector<std::vector<double>> same(8, {0.3, 0.4, 0.0});
  const auto one = hdbscan_cluster(Matrix::from_rows(same), {5});
  CHECK(one.k == 1);
  CHECK(one.noise_count() == 0);

  CHECK_THROWS_AS(hdbscan_cluster(Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}, {2, 1}}), {5}), Error);

  auto with_zero = synthetic::direction_bundles(10, 0.05, 4).points;
  with_zero[3] = {0, 0, 0};
  CHECK_THROWS_AS(hdbscan_cluster(Matrix::from_rows(with_zero), {5}), Error);
  HdbscanOptions opts{5};
  opts.zero_norm = ZeroNormPolicy::Noise;
  const auto labeled = hdbscan_cluster(Matrix::from_rows(with_zero), opts);
  CHECK(labeled.labels[3] == -1);
}

TEST_CASE("hdbscan cluster ids follow the lowest member index") {
  const auto data = synthetic::direction_bundles(15, 0.03, 9);
  const auto l = hdbscan_cluster(Matrix::from_rows(data.points), {5});
  int next = 0;
  for (int label : l.labels) {
    if (label < 0) continue;
    CHECK(label <= next);
    if (label == next) ++next;
  }
}

TEST_CASE("known cluster ratios from synthetic score records") {
  // Two perturbation-trained conditions whose means average to the target
  // perturbation mean, plus the original-prompt condition.
  const std::vector<std::string> ids = {"a1", "a2", "a3", "a4", "a5", "a6"};
  ClusterLabeling labels{{0, 0, 0, 1, 1, -1}, 2};
  std::vector<ScoreRecord> records;
  for (const auto& id : {"a1", "a2", "a3"}) {
    records.push_back(rec(id, "text-sim", 0.4755 - 0.1));
    records.push_back(rec(id, "joint-diverse", 0.4755 + 0.1));
    records.push_back(rec(id, "original", 0.0347));
    records.push_back(rec(id, "no-training", 0.9));
    records.push_back(rec(id, "original", 0.99, -1));  // original prompt, filtered
  }
  for (const auto& id : {"a4", "a5"}) {
    records.push_back(rec(id, "text-sim", 0.9050));
    records.push_back(rec(id, "original", 0.3713));
  }
  records.push_back(rec("a6", "text-sim", 0.4131));
  records.push_back(rec("a6", "original", 0.0126));

  const auto rows = cluster_score_table("audio", ids, labels, records, {}, {{0, "religion"}});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].cluster_id == 0);
  CHECK(rows[0].theme == "religion");
  CHECK(std::abs(*rows[0].ratio - 13.70) < 0.01);
  CHECK(std::abs(*rows[0].perturbation_mean - 0.4755) < 1e-12);
  CHECK(rows[1].cluster_id == 1);
  CHECK(std::abs(*rows[1].ratio - 2.44) < 0.01);
  CHECK(rows[2].cluster_id == -1);
  CHECK(std::abs(*rows[2].perturbation_mean / *rows[2].baseline_mean - 32.79) < 0.01);
}

TEST_CASE("zero baseline omits the ratio and flags the row") {
  const std::vector<std::string> ids = {"x", "y"};
  ClusterLabeling labels{{0, 1}, 2};
  std::vector<ScoreRecord> records = {rec("x", "random", 0.5), rec("x", "original", 0.0), rec("y", "random", 0.5),
                                      rec("y", "original", 0.25)};
  const auto rows = cluster_score_table("image", ids, labels, records);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].cluster_id == 1);
  CHECK(*rows[0].ratio == doctest::Approx(2.0));
  CHECK_FALSE(rows[1].ratio.has_value());
  CHECK(rows[1].flagged);
}

TEST_CASE("scores for unlabeled items are rejected") {
  const std::vector<std::string> ids = {"x"};
  ClusterLabeling labels{{0}, 1};
  std::vector<ScoreRecord> records = {rec("x", "random", 0.5), rec("ghost", "random", 0.5)};
  CHECK_THROWS_WITH_AS(cluster_score_table("image", ids, labels, records), doctest::Contains("ghost"), Error);
}

TEST_CASE("cluster rows recompute from raw records") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<std::string> ids;
  std::vector<int> lab;
  for (int i = 0; i < 30; ++i) {
    ids.push_back("i" + std::to_string(i));
    lab.push_back(i % 4 == 3 ? -1 : i % 3);
  }
  ClusterLabeling labels{lab, 3};
  std::vector<ScoreRecord> records;
  for (const auto& id : ids)
    for (const char* c : {"original", "random", "text-sim"})
      for (int v = 0; v < 3; ++v) records.push_back(rec(id, c, u(rng), v));
  const auto rows = cluster_score_table("video", ids, labels, records);
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) CHECK(*rows[i - 1].ratio > *rows[i].ratio);
  for (const auto& row : rows) {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& r : records) {
      const auto pos = std::find(ids.begin(), ids.end(), r.item_id) - ids.begin();
      if (lab[pos] != row.cluster_id) continue;
      acc[r.condition].first += r.value;
      acc[r.condition].second += 1;
    }
    const double base = acc["original"].first / acc["original"].second;
    const double pert = (acc["random"].first / acc["random"].second + acc["text-sim"].first / acc["text-sim"].second) / 2;
    CHECK(std::abs(*row.baseline_mean - base) < 1e-9);
    CHECK(std::abs(*row.perturbation_mean - pert) < 1e-9);
    if (row.cluster_id >= 0) CHECK(std::abs(*row.ratio - pert / base) < 1e-9);
  }
}

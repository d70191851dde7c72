#include <doctest.h>

#include <cmath>
#include <random>

#include "gpert/error.hpp"
#include "gpert/report.hpp"

using namespace gpert;

namespace {

std::vector<QAItem> items_for(int n) {
  std::vector<QAItem> items;
  for (int i = 0; i < n; ++i)
    items.push_back({"i" + std::to_string(i), i % 2 ? ModalityKind::Audio : ModalityKind::Image, "x", "p", "a", {}});
  return items;
}

}  // namespace

TEST_CASE("cell formatting") {
  CHECK(format_cell(0.4647, 0.0271) == "0.4647 (0.0271)");
  CHECK(format_cell(1.0, 0.0) == "1.0000 (0.0000)");
}

TEST_CASE("report numbers recompute from raw records") {
  const auto items = items_for(10);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<ScoreRecord> scores;
  for (const auto& item : items)
    for (const char* cond : {"original", "random"})
      for (int v = -1; v < 4; ++v) scores.push_back({item.id, cond, v, "bleu", u(rng), "m"});

  std::map<std::string, SampledPrompts> picks;
  for (const auto& item : items) picks[item.id] = {item.id, SamplingStrategy::Random, {"a", "b"}, {0, 2}, false};
  ReportInputs in{scores, items, {{SamplingStrategy::Random, picks}}, CvMode::VarianceOverMean};
  const auto report = build_report(in);

  REQUIRE(report.summaries.size() == 8);
  for (const auto& row : report.summaries) {
    std::vector<double> vals;
    for (const auto& s : scores) {
      const bool audio = std::stoi(s.item_id.substr(1)) % 2 == 1;
      if ((audio ? "audio" : "image") != row.modality || s.condition != row.condition) continue;
      if ((s.variant_index < 0) != (row.eval_set == EvalSet::Original)) continue;
      vals.push_back(s.value);
    }
    REQUIRE(vals.size() == row.summary.n);
    double mean = 0;
    for (double v : vals) mean += v / vals.size();
    double ss = 0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / (vals.size() - 1)) / std::sqrt(static_cast<double>(vals.size()));
    CHECK(std::abs(row.summary.mean - mean) < 1e-9);
    CHECK(std::abs(row.summary.std_err - se) < 1e-9);
  }

  REQUIRE(report.cv.size() == 4);
  for (const auto& row : report.cv) {
    CHECK(row.flag.empty());
    REQUIRE(row.cv.has_value());
  }

  // Only perturbed variants 0 and 2 enter the per-strategy breakdown.
  REQUIRE(report.breakdown.size() == 4);
  for (const auto& b : report.breakdown) {
    CHECK(b.strategy == SamplingStrategy::Random);
    CHECK(b.row.summary.n == 10);
  }
  const auto md = report.markdown();
  CHECK(md.find("random perturbations") != std::string::npos);
  CHECK(report.summary_csv().find(format_cell(report.summaries[0].summary.mean, report.summaries[0].summary.std_err)) !=
        std::string::npos);
}

TEST_CASE("one breakdown table per strategy") {
  const auto items = items_for(2);
  std::vector<ScoreRecord> scores;
  for (const auto& item : items)
    for (int v = 0; v < 3; ++v) scores.push_back({item.id, "random", v, "bleu", 0.1 * (v + 1), "m"});
  std::map<SamplingStrategy, std::map<std::string, SampledPrompts>> sampled;
  for (auto s : {SamplingStrategy::TextSim, SamplingStrategy::JointDiverse})
    for (const auto& item : items) sampled[s][item.id] = {item.id, s, {"x"}, {s == SamplingStrategy::TextSim ? 0u : 2u}, false};
  const auto report = build_report({scores, items, sampled, CvMode::VarianceOverMean});
  std::size_t text = 0, joint = 0;
  for (const auto& b : report.breakdown) {
    if (b.strategy == SamplingStrategy::TextSim) {
      ++text;
      CHECK(b.row.summary.mean == doctest::Approx(0.1));
    } else {
      ++joint;
      CHECK(b.row.summary.mean == doctest::Approx(0.3));
    }
  }
  CHECK(text == 2);
  CHECK(joint == 2);
  const auto md = report.markdown();
  CHECK(md.find("text-sim perturbations") != std::string::npos);
  CHECK(md.find("joint-diverse perturbations") != std::string::npos);
}

TEST_CASE("cv flags small and non-positive groups") {
  const auto items = items_for(2);
  std::vector<ScoreRecord> scores = {{"i0", "a", 0, "bleu", 0.5, "m"},
                                     {"i0", "b", 0, "bleu", 0.0, "m"},
                                     {"i0", "b", 1, "bleu", 0.0, "m"}};
  const auto report = build_report({scores, items, {}, CvMode::VarianceOverMean});
  REQUIRE(report.cv.size() == 2);
  CHECK(report.cv[0].flag == "n<2");
  CHECK(report.cv[1].flag == "mean<=0");
  CHECK_FALSE(report.cv[1].cv.has_value());
}

TEST_CASE("unknown items in scores are rejected") {
  const auto items = items_for(1);
  std::vector<ScoreRecord> scores = {{"nope", "a", 0, "bleu", 0.5, "m"}};
  CHECK_THROWS_WITH_AS(build_report({scores, items, {}, CvMode::VarianceOverMean}), doctest::Contains("nope"), Error);
}

TEST_CASE("cluster table rendering") {
  ClusterScoreRow row;
  row.modality = "audio";
  row.cluster_id = 0;
  row.size = 3;
  row.theme = "religion";
  row.condition_means = {{"original", 0.0347}, {"random", 0.4755}};
  row.perturbation_mean = 0.4755;
  row.baseline_mean = 0.0347;
  row.ratio = 0.4755 / 0.0347;
  row.example_ids = {"a1"};
  const std::vector<ClusterScoreRow> rows = {row};
  const auto md = cluster_markdown(rows, {{"a1", "what is | this?"}}, "BLEU");
  CHECK(md.find("13.70") != std::string::npos);
  CHECK(md.find("what is \\| this?") != std::string::npos);
  const auto csv = cluster_csv(rows);
  CHECK(csv.find("mean:original") != std::string::npos);
  CHECK(csv.find("religion") != std::string::npos);
}

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpert/analysis.hpp"
#include "gpert/metrics.hpp"
#include "gpert/types.hpp"

namespace gpert {

// "0.4647 (0.0271)"
std::string format_cell(double mean, double std_err);

enum class EvalSet { Original, Perturbed };
std::string_view to_string(EvalSet e);

struct SummaryRow {
  std::string model;
  std::string modality;
  std::string condition;
  std::string metric;
  EvalSet eval_set = EvalSet::Perturbed;
  ScoreSummary summary;
};

struct CvRow {
  std::string model;
  std::string modality;
  std::string condition;
  std::string metric;
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> cv;
  CvMode mode = CvMode::VarianceOverMean;
  std::string flag;  // empty, "mean<=0" or "n<2"
};

struct BreakdownRow {
  SamplingStrategy strategy = SamplingStrategy::TextSim;
  SummaryRow row;
};

struct ReportInputs {
  std::span<const ScoreRecord> scores;
  std::span<const QAItem> items;
  // Perturbation indices each strategy selected per item; drives the
  // per-strategy breakdown of perturbed-prompt scores.
  std::map<SamplingStrategy, std::map<std::string, SampledPrompts>> sampled;
  CvMode cv_mode = CvMode::VarianceOverMean;
};

struct Report {
  std::vector<SummaryRow> summaries;
  std::vector<CvRow> cv;
  std::vector<BreakdownRow> breakdown;

  std::string summary_csv() const;
  std::string cv_csv() const;
  std::string breakdown_csv() const;
  std::string markdown() const;
};

// Throws when a score references an item missing from `items`.
Report build_report(const ReportInputs& inputs);

// Cluster report CSV: modality, cluster, size, theme, one column per
// condition mean, perturbation mean, ratio.
std::string cluster_csv(std::span<const ClusterScoreRow> rows);
// Markdown table laid out as modality | cluster | example prompts |
// perturbation-trained mean | original-prompt mean | ratio.
std::string cluster_markdown(std::span<const ClusterScoreRow> rows, const std::map<std::string, std::string>& prompts,
                             const std::string& metric);

}  // namespace gpert

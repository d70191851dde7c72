#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gpert/embedding.hpp"
#include "gpert/types.hpp"

namespace gpert {

namespace metric {
inline constexpr std::string_view kBleu = "bleu";
inline constexpr std::string_view kRougeL = "rouge_l";
inline constexpr std::string_view kSemanticF1 = "semantic_f1";
}  // namespace metric

struct BleuOptions {
  int max_n = 4;
  // Add-one smoothing of n-gram precisions for n >= 2.
  bool smoothing = true;
};

// Sentence-level BLEU over metric_tokens. 0 for an empty candidate.
double bleu(std::string_view candidate, std::string_view reference, const BleuOptions& options = {});
double bleu_tokens(std::span<const std::string> candidate, std::span<const std::string> reference,
                   const BleuOptions& options = {});

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// ROUGE-L F1 over metric_tokens.
double rouge_l(std::string_view candidate, std::string_view reference);
double rouge_l_tokens(std::span<const std::string> candidate, std::span<const std::string> reference);

using TokenEmbedder = std::function<EmbeddingVector(std::string_view token)>;

// Greedy matching over a cosine matrix with rows = reference tokens and
// columns = candidate tokens. Cosines are rescaled to [0, 1] by (s + 1) / 2.
// Recall averages row maxima, precision column maxima.
double greedy_match_f1(const std::vector<std::vector<double>>& cosine_rows);

// BERT-Score style F1 with a pluggable token embedder. 0 if either side is empty.
double semantic_f1(std::string_view candidate, std::string_view reference, const TokenEmbedder& embedder);

struct ScoreRecord {
  std::string item_id;
  std::string condition;
  int variant_index = -1;  // -1 is the original prompt
  std::string metric;
  double value = 0.0;
  std::string model;

  bool operator==(const ScoreRecord&) const = default;
};

void to_json(nlohmann::json& j, const ScoreRecord& r);
void from_json(const nlohmann::json& j, ScoreRecord& r);

struct ScoreSummary {
  double mean = 0.0;
  double std_err = 0.0;
  std::size_t n = 0;
  bool single_sample = false;  // n == 1, std_err reported as 0
};

// Mean and s / sqrt(n) with the n-1 standard deviation. Throws on an empty list.
ScoreSummary summarize(std::span<const double> values);

// Sample variance / mean (default) or sample std / mean. Throws on n < 2 or a
// zero mean; callers flag negative means themselves.
double coefficient_of_variation(std::span<const double> values, CvMode mode = CvMode::VarianceOverMean);

// (original - perturbed) / original. Throws when original <= 0.
double degradation_delta(double original_score, double perturbed_score);

}  // namespace gpert

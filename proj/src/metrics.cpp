#include "gpert/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gpert/error.hpp"
#include "gpert/text.hpp"

namespace gpert {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> count_ngrams(std::span<const std::string> toks, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[Ngram(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

}  // namespace

double bleu_tokens(std::span<const std::string> candidate, std::span<const std::string> reference,
                   const BleuOptions& options) {
  if (candidate.empty()) return 0.0;
  if (options.max_n < 1) throw Error("bleu: max_n must be at least 1");
  double log_sum = 0.0;
  for (int n = 1; n <= options.max_n; ++n) {
    const auto cand = count_ngrams(candidate, static_cast<std::size_t>(n));
    const auto ref = count_ngrams(reference, static_cast<std::size_t>(n));
    std::size_t matched = 0, total = 0;
    for (const auto& [gram, c] : cand) {
      total += c;
      if (auto it = ref.find(gram); it != ref.end()) matched += std::min(c, it->second);
    }
    double p;
    if (n >= 2 && options.smoothing) {
      p = (static_cast<double>(matched) + 1.0) / (static_cast<double>(total) + 1.0);
    } else {
      if (matched == 0 || total == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = std::min(1.0, std::exp(1.0 - r / c));
  return std::clamp(bp * std::exp(log_sum / options.max_n), 0.0, 1.0);
}

double bleu(std::string_view candidate, std::string_view reference, const BleuOptions& options) {
  const auto c = text::metric_tokens(candidate);
  const auto r = text::metric_tokens(reference);
  return bleu_tokens(c, r, options);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (const auto& x : a) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = x == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_tokens(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

double rouge_l(std::string_view candidate, std::string_view reference) {
  const auto c = text::metric_tokens(candidate);
  const auto r = text::metric_tokens(reference);
  return rouge_l_tokens(c, r);
}

double greedy_match_f1(const std::vector<std::vector<double>>& cosine_rows) {
  if (cosine_rows.empty() || cosine_rows.front().empty()) return 0.0;
  const std::size_t rows = cosine_rows.size();
  const std::size_t cols = cosine_rows.front().size();
  std::vector<double> col_max(cols, 0.0);
  double recall = 0.0;
  for (const auto& row : cosine_rows) {
    if (row.size() != cols) throw Error("greedy_match_f1: ragged similarity matrix");
    double row_max = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double s = (row[j] + 1.0) / 2.0;
      row_max = std::max(row_max, s);
      col_max[j] = std::max(col_max[j], s);
    }
    recall += row_max;
  }
  recall /= static_cast<double>(rows);
  const double precision = std::accumulate(col_max.begin(), col_max.end(), 0.0) / static_cast<double>(cols);
  if (precision + recall == 0.0) return 0.0;
  return std::clamp(2.0 * precision * recall / (precision + recall), 0.0, 1.0);
}

double semantic_f1(std::string_view candidate, std::string_view reference, const TokenEmbedder& embedder) {
  const auto c = text::metric_tokens(candidate);
  const auto r = text::metric_tokens(reference);
  if (c.empty() || r.empty()) return 0.0;
  std::vector<EmbeddingVector> ce, re;
  for (const auto& t : c) ce.push_back(embedder(t));
  for (const auto& t : r) re.push_back(embedder(t));
  std::vector<std::vector<double>> sim(r.size(), std::vector<double>(c.size()));
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) sim[i][j] = cosine_similarity(re[i], ce[j]);
  return greedy_match_f1(sim);
}

void to_json(nlohmann::json& j, const ScoreRecord& r) {
  j = nlohmann::json{{"item_id", r.item_id},     {"condition", r.condition}, {"variant_index", r.variant_index},
                     {"metric", r.metric},       {"value", r.value},         {"model", r.model}};
}

void from_json(const nlohmann::json& j, ScoreRecord& r) {
  r.item_id = j.at("item_id").get<std::string>();
  r.condition = j.at("condition").get<std::string>();
  r.variant_index = j.at("variant_index").get<int>();
  r.metric = j.at("metric").get<std::string>();
  r.value = j.at("value").get<double>();
  r.model = j.value("model", std::string());
  if (!std::isfinite(r.value) || r.value < 0.0 || r.value > 1.0)
    throw Error("score value out of [0, 1] for item '" + r.item_id + "'");
}

ScoreSummary summarize(std::span<const double> values) {
  if (values.empty()) throw Error("summarize: empty list");
  ScoreSummary s;
  s.n = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n == 1) {
    s.single_sample = true;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  s.std_err = sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

double coefficient_of_variation(std::span<const double> values, CvMode mode) {
  if (values.size() < 2) throw Error("coefficient of variation needs at least 2 values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (mean == 0.0) throw Error("coefficient of variation undefined for zero mean");
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = ss / (n - 1.0);
  return mode == CvMode::VarianceOverMean ? var / mean : std::sqrt(var) / mean;
}

double degradation_delta(double original_score, double perturbed_score) {
  if (!(original_score > 0.0)) throw Error("degradation_delta: original score must be positive");
  return (original_score - perturbed_score) / original_score;
}

}  // namespace gpert

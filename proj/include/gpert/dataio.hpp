#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gpert/metrics.hpp"
#include "gpert/types.hpp"

namespace gpert {

// Generic JSONL plumbing. Blank lines are skipped; the callback receives the
// parsed object and its 1-based line number.
void for_each_jsonl(std::string_view contents, const std::function<void(const nlohmann::json&, long)>& fn);
void read_jsonl(const std::filesystem::path& path, const std::function<void(const nlohmann::json&, long)>& fn);
std::string read_file(const std::filesystem::path& path);
// Writes atomically (temp file + rename), LF endings.
void write_file(const std::filesystem::path& path, std::string_view contents);

// One object per line: id, modality, data_ref, prompt, answer; extra fields
// (e.g. preprocessing metadata) pass through. Throws ParseError naming the
// line, or ValidationError with every invariant violation.
std::vector<QAItem> parse_qa_dataset(std::string_view contents);
std::vector<QAItem> load_qa_dataset(const std::filesystem::path& path);
std::string serialize_qa_dataset(std::span<const QAItem> items);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<QAItem> train;  // both sorted by id
  std::vector<QAItem> test;
};

// Items are ranked by hash(seed, id); the lowest round(fraction * n) train.
Split split_dataset(std::span<const QAItem> items, const SplitSpec& spec);

// Perturbation set file: one line per candidate
// {prompt_id, method, index, text, padded}.
std::string serialize_perturbation_sets(const std::map<std::string, PerturbationSet>& sets);
std::map<std::string, PerturbationSet> parse_perturbation_sets(std::string_view contents);
std::map<std::string, PerturbationSet> load_perturbation_sets(const std::filesystem::path& path);

// Sampled file: one SampledPrompts object per line.
std::string serialize_sampled(const std::map<std::string, SampledPrompts>& sampled);
std::map<std::string, SampledPrompts> parse_sampled(std::string_view contents);
std::map<std::string, SampledPrompts> load_sampled(const std::filesystem::path& path);

inline constexpr std::string_view kOriginalCondition = "original";

struct AugmentedRecord {
  std::string prompt_id;
  ModalityKind modality = ModalityKind::Image;
  std::string data_ref;
  std::string prompt;
  std::string answer;
  std::string strategy;  // sampling strategy name or "original"
  std::size_t variant_index = 0;
  nlohmann::json metadata = nlohmann::json::object();

  bool operator==(const AugmentedRecord&) const = default;
};

void to_json(nlohmann::json& j, const AugmentedRecord& r);
void from_json(const nlohmann::json& j, AugmentedRecord& r);

// condition == "original": one record per item carrying the original prompt.
// Otherwise one record per selected perturbation; `sampled` must cover every
// train item (the error lists the gaps). Sorted by (prompt_id, variant_index).
std::vector<AugmentedRecord> build_augmented(std::span<const QAItem> train_items,
                                             const std::map<std::string, SampledPrompts>* sampled,
                                             std::string_view condition);
std::string serialize_augmented(std::span<const AugmentedRecord> records);
std::vector<AugmentedRecord> parse_augmented(std::string_view contents);

struct ResponseRecord {
  std::string prompt_id;
  std::string condition;
  int variant_index = -1;  // -1 is the original prompt
  std::string response;
  std::string model;

  bool operator==(const ResponseRecord&) const = default;
};

void to_json(nlohmann::json& j, const ResponseRecord& r);
void from_json(const nlohmann::json& j, ResponseRecord& r);
std::vector<ResponseRecord> parse_responses(std::string_view contents);
std::vector<ResponseRecord> load_responses(const std::filesystem::path& path);
std::string serialize_responses(std::span<const ResponseRecord> responses);

struct MetricsConfig {
  bool bleu = true;
  bool rouge_l = true;
  bool semantic_f1 = false;
  BleuOptions bleu_options;
  TokenEmbedder token_embedder;  // required when semantic_f1 is on
};

// Scores every response against its item's gold answer. Dangling ids,
// out-of-range variants (when sets are given) and duplicate
// (model, id, condition, variant) keys throw ValidationError listing them all.
std::vector<ScoreRecord> join_scores(std::span<const ResponseRecord> responses, std::span<const QAItem> items,
                                     const MetricsConfig& config,
                                     const std::map<std::string, PerturbationSet>* sets = nullptr);

std::string serialize_scores(std::span<const ScoreRecord> records);
std::vector<ScoreRecord> parse_scores(std::string_view contents);
std::vector<ScoreRecord> load_scores(const std::filesystem::path& path);

// Sidecar CSV with header modality,cluster,theme.
std::map<std::pair<std::string, int>, std::string> load_themes(const std::filesystem::path& path);
std::vector<std::vector<std::string>> parse_csv(std::string_view contents);
std::string csv_field(std::string_view s);

}  // namespace gpert

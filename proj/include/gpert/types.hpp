#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gpert {

enum class ModalityKind { Audio, Image, Video };

enum class PerturbMethod { LlmParaphrase, Paraphraser, BackTranslation, Stub };

enum class SamplingStrategy { TextSim, ModalitySim, Random, JointDiverse };

enum class CvMode { VarianceOverMean, StdOverMean };

enum class DiversityReference { Candidate, Original };

std::string_view to_string(ModalityKind m);
std::string_view to_string(PerturbMethod m);
std::string_view to_string(SamplingStrategy s);
std::string_view to_string(CvMode m);
std::string_view to_string(DiversityReference r);

// The parse_* functions throw gpert::ParseError on unknown names.
ModalityKind parse_modality(std::string_view s);
PerturbMethod parse_perturb_method(std::string_view s);
SamplingStrategy parse_strategy(std::string_view s);
CvMode parse_cv_mode(std::string_view s);
DiversityReference parse_diversity_reference(std::string_view s);

inline constexpr SamplingStrategy kAllStrategies[] = {
    SamplingStrategy::TextSim, SamplingStrategy::ModalitySim, SamplingStrategy::Random,
    SamplingStrategy::JointDiverse};

struct QAItem {
  std::string id;
  ModalityKind modality = ModalityKind::Image;
  std::string data_ref;
  std::string prompt;
  std::string answer;
  // Unrecognized fields from the source line (preprocessing metadata etc.),
  // carried through untouched.
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const QAItem&) const = default;
};

struct PerturbationSet {
  std::string prompt_id;
  PerturbMethod method = PerturbMethod::Stub;
  std::vector<std::string> candidates;
  // True when the provider under-delivered and stub variants filled the gap.
  bool padded = false;

  bool operator==(const PerturbationSet&) const = default;
};

struct SampledPrompts {
  std::string prompt_id;
  SamplingStrategy strategy = SamplingStrategy::Random;
  std::vector<std::string> selected;
  std::vector<std::size_t> indices;
  // Set when every diversity weight clamped and a uniform draw was used.
  bool uniform_fallback = false;

  bool operator==(const SampledPrompts&) const = default;
};

// Hyperparameters of the external fine-tuning run. Recorded, never executed.
struct TrainingMetadata {
  int epochs = 3;
  double learning_rate = 5e-5;
  int batch_size = 2;
  std::string optimizer = "adam";
};

struct PipelineConfig {
  std::size_t n_perturbations = 10;
  std::size_t k_selected = 3;
  double train_fraction = 0.8;
  std::uint64_t rng_seed = 0;
  double negative_weight_epsilon = 1e-9;
  CvMode cv_mode = CvMode::VarianceOverMean;
  DiversityReference diversity_reference = DiversityReference::Candidate;
  TrainingMetadata training;

  // Empty when the configuration is usable.
  std::vector<std::string> problems() const;
};

void to_json(nlohmann::json& j, const QAItem& item);
void to_json(nlohmann::json& j, const PerturbationSet& set);
void from_json(const nlohmann::json& j, PerturbationSet& set);
void to_json(nlohmann::json& j, const SampledPrompts& s);
void from_json(const nlohmann::json& j, SampledPrompts& s);
void to_json(nlohmann::json& j, const PipelineConfig& c);
// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, PipelineConfig& c);

}  // namespace gpert

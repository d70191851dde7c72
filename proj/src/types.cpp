#include "gpert/types.hpp"

#include <array>
#include <utility>

#include "gpert/error.hpp"

namespace gpert {

ValidationError::ValidationError(std::vector<std::string> problems)
    : Error([&] {
        std::string msg = "validation failed";
        for (const auto& p : problems) msg += "; " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

namespace {

template <typename E, std::size_t N>
E lookup(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s,
         std::string_view what) {
  for (const auto& [e, name] : table)
    if (name == s) return e;
  throw ParseError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E e) {
  for (const auto& [v, name] : table)
    if (v == e) return name;
  return "?";
}

constexpr std::array<std::pair<ModalityKind, std::string_view>, 3> kModalities{{
    {ModalityKind::Audio, "audio"},
    {ModalityKind::Image, "image"},
    {ModalityKind::Video, "video"},
}};

constexpr std::array<std::pair<PerturbMethod, std::string_view>, 4> kMethods{{
    {PerturbMethod::LlmParaphrase, "llm-paraphrase"},
    {PerturbMethod::Paraphraser, "paraphraser"},
    {PerturbMethod::BackTranslation, "back-translation"},
    {PerturbMethod::Stub, "stub"},
}};

constexpr std::array<std::pair<SamplingStrategy, std::string_view>, 4> kStrategies{{
    {SamplingStrategy::TextSim, "text-sim"},
    {SamplingStrategy::ModalitySim, "modality-sim"},
    {SamplingStrategy::Random, "random"},
    {SamplingStrategy::JointDiverse, "joint-diverse"},
}};

constexpr std::array<std::pair<CvMode, std::string_view>, 2> kCvModes{{
    {CvMode::VarianceOverMean, "variance-over-mean"},
    {CvMode::StdOverMean, "std-over-mean"},
}};

constexpr std::array<std::pair<DiversityReference, std::string_view>, 2> kDiversityRefs{{
    {DiversityReference::Candidate, "candidate"},
    {DiversityReference::Original, "original"},
}};

}  // namespace

std::string_view to_string(ModalityKind m) { return name_of(kModalities, m); }
std::string_view to_string(PerturbMethod m) { return name_of(kMethods, m); }
std::string_view to_string(SamplingStrategy s) { return name_of(kStrategies, s); }
std::string_view to_string(CvMode m) { return name_of(kCvModes, m); }
std::string_view to_string(DiversityReference r) { return name_of(kDiversityRefs, r); }

ModalityKind parse_modality(std::string_view s) { return lookup(kModalities, s, "modality"); }
PerturbMethod parse_perturb_method(std::string_view s) { return lookup(kMethods, s, "perturbation method"); }
SamplingStrategy parse_strategy(std::string_view s) { return lookup(kStrategies, s, "sampling strategy"); }
CvMode parse_cv_mode(std::string_view s) { return lookup(kCvModes, s, "cv mode"); }
DiversityReference parse_diversity_reference(std::string_view s) {
  return lookup(kDiversityRefs, s, "diversity reference");
}

std::vector<std::string> PipelineConfig::problems() const {
  std::vector<std::string> out;
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) out.push_back("train_fraction must be in (0, 1)");
  if (k_selected > n_perturbations) out.push_back("k_selected exceeds n_perturbations");
  if (k_selected == 0) out.push_back("k_selected must be positive");
  if (!(negative_weight_epsilon > 0.0)) out.push_back("negative_weight_epsilon must be positive");
  return out;
}

void to_json(nlohmann::json& j, const QAItem& item) {
  j = item.extra.is_object() ? item.extra : nlohmann::json::object();
  j["id"] = item.id;
  j["modality"] = std::string(to_string(item.modality));
  j["data_ref"] = item.data_ref;
  j["prompt"] = item.prompt;
  j["answer"] = item.answer;
}

void to_json(nlohmann::json& j, const PerturbationSet& set) {
  j = nlohmann::json{{"prompt_id", set.prompt_id},
                     {"method", std::string(to_string(set.method))},
                     {"candidates", set.candidates},
                     {"padded", set.padded}};
}

void from_json(const nlohmann::json& j, PerturbationSet& set) {
  set.prompt_id = j.at("prompt_id").get<std::string>();
  set.method = parse_perturb_method(j.at("method").get<std::string>());
  set.candidates = j.at("candidates").get<std::vector<std::string>>();
  set.padded = j.value("padded", false);
}

void to_json(nlohmann::json& j, const SampledPrompts& s) {
  j = nlohmann::json{{"prompt_id", s.prompt_id},
                     {"strategy", std::string(to_string(s.strategy))},
                     {"selected", s.selected},
                     {"indices", s.indices},
                     {"uniform_fallback", s.uniform_fallback}};
}

void from_json(const nlohmann::json& j, SampledPrompts& s) {
  s.prompt_id = j.at("prompt_id").get<std::string>();
  s.strategy = parse_strategy(j.at("strategy").get<std::string>());
  s.selected = j.at("selected").get<std::vector<std::string>>();
  s.indices = j.at("indices").get<std::vector<std::size_t>>();
  s.uniform_fallback = j.value("uniform_fallback", false);
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{
      {"n_perturbations", c.n_perturbations},
      {"k_selected", c.k_selected},
      {"train_fraction", c.train_fraction},
      {"rng_seed", c.rng_seed},
      {"negative_weight_epsilon", c.negative_weight_epsilon},
      {"cv_mode", std::string(to_string(c.cv_mode))},
      {"diversity_reference", std::string(to_string(c.diversity_reference))},
      {"training",
       {{"epochs", c.training.epochs},
        {"learning_rate", c.training.learning_rate},
        {"batch_size", c.training.batch_size},
        {"optimizer", c.training.optimizer}}},
  };
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  c.n_perturbations = j.value("n_perturbations", c.n_perturbations);
  c.k_selected = j.value("k_selected", c.k_selected);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.negative_weight_epsilon = j.value("negative_weight_epsilon", c.negative_weight_epsilon);
  if (j.contains("cv_mode")) c.cv_mode = parse_cv_mode(j.at("cv_mode").get<std::string>());
  if (j.contains("diversity_reference"))
    c.diversity_reference = parse_diversity_reference(j.at("diversity_reference").get<std::string>());
  if (j.contains("training")) {
    const auto& t = j.at("training");
    c.training.epochs = t.value("epochs", c.training.epochs);
    c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
    c.training.batch_size = t.value("batch_size", c.training.batch_size);
    c.training.optimizer = t.value("optimizer", c.training.optimizer);
  }
}

}  // namespace gpert

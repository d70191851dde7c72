#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gpert/embedding.hpp"
#include "gpert/types.hpp"

namespace gpert {

// Candidates of one prompt together with the embeddings the strategies need.
// cand_embs may be left empty for random sampling.
struct CandidatePool {
  std::string prompt_id;
  std::vector<std::string> candidates;
  std::vector<EmbeddingVector> cand_embs;
  EmbeddingVector x_t;  // original prompt text
  EmbeddingVector x_m;  // modality asset

  // Throws gpert::Error when sizes, dimensions or norms are unusable.
  void check_embeddings() const;
};

enum class SimilarityTarget { Text, Modality };

struct SamplerOptions {
  double epsilon = 1e-9;
  DiversityReference reference = DiversityReference::Candidate;
};

// Descending cosine similarity to x_t or x_m, ties to the lower index.
SampledPrompts top_k_by_similarity(const CandidatePool& pool, SimilarityTarget target, std::size_t k);

// Uniform without replacement, in draw order.
SampledPrompts random_sample(const CandidatePool& pool, std::size_t k, std::uint64_t seed);

// sim(c, x_t) + sim(c, x_m).
double joint_sim(const EmbeddingVector& cand, const EmbeddingVector& x_t, const EmbeddingVector& x_m);

struct WeightTerm {
  double weight = 0.0;
  bool clamped = false;  // joint similarity fell to or below epsilon
};

// Joint similarity divided by the mean similarity to the already-sampled
// embeddings. Numerator and denominator are each clamped at epsilon from below;
// with nothing sampled yet the plain (clamped) joint similarity is returned.
// With DiversityReference::Original the denominator uses x_t in place of cand.
WeightTerm diversity_term(const EmbeddingVector& cand, const EmbeddingVector& x_t, const EmbeddingVector& x_m,
                          std::span<const EmbeddingVector* const> sampled, const SamplerOptions& options = {});

double diversity_weight(const EmbeddingVector& cand, const EmbeddingVector& x_t, const EmbeddingVector& x_m,
                        std::span<const EmbeddingVector* const> sampled, const SamplerOptions& options = {});

// Unnormalized draw weights over `remaining` given the indices already drawn.
// All-clamped weight vectors are replaced by uniform ones and flagged.
struct DrawWeights {
  std::vector<double> weights;
  bool uniform_fallback = false;
};
DrawWeights joint_diverse_weights(const CandidatePool& pool, std::span<const std::size_t> remaining,
                                  std::span<const std::size_t> drawn, const SamplerOptions& options = {});

// Sequential draws without replacement, each proportional to the diversity
// weight against what has been drawn so far.
SampledPrompts joint_diverse_sample(const CandidatePool& pool, std::size_t k, std::uint64_t seed,
                                    const SamplerOptions& options = {});

struct SampleAllResult {
  std::map<std::string, SampledPrompts> selections;
  // "<id>: <reason>" for every item that could not be sampled.
  std::vector<std::string> incomplete;

  bool complete() const { return incomplete.empty(); }
};

// Corpus-wide sampling. Item seeds are derive_seed(seed, "sample/<strategy>",
// id), so output is independent of item order. Store keys are (id, "text"),
// (id, "modality") and (id, "perturbation:<i>").
SampleAllResult sample_all(std::span<const QAItem> items, const std::map<std::string, PerturbationSet>& sets,
                           const EmbeddingStore& store, SamplingStrategy strategy, std::size_t k,
                           std::uint64_t seed, const SamplerOptions& options = {});

}  // namespace gpert

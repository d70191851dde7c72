#include "gpert/sampler.hpp"

#include <algorithm>
#include <numeric>

#include "gpert/error.hpp"
#include "gpert/hashing.hpp"

namespace gpert {

namespace {

void require_k(std::size_t k) {
  if (k == 0) throw Error("k must be at least 1");
}

SampledPrompts make_result(const CandidatePool& pool, SamplingStrategy strategy,
                           std::vector<std::size_t> indices) {
  SampledPrompts out;
  out.prompt_id = pool.prompt_id;
  out.strategy = strategy;
  for (auto i : indices) out.selected.push_back(pool.candidates[i]);
  out.indices = std::move(indices);
  return out;
}

}  // namespace

void CandidatePool::check_embeddings() const {
  if (candidates.size() != cand_embs.size())
    throw Error("pool '" + prompt_id + "': " + std::to_string(candidates.size()) + " candidates but " +
                std::to_string(cand_embs.size()) + " embeddings");
  const std::size_t dim = x_t.dim();
  auto check = [&](const EmbeddingVector& v, const std::string& what) {
    if (v.dim() != dim || dim == 0) throw Error("pool '" + prompt_id + "': dimension mismatch in " + what);
    if (!(v.norm() > 0.0)) throw Error("pool '" + prompt_id + "': zero-norm embedding in " + what);
  };
  check(x_t, "text embedding");
  check(x_m, "modality embedding");
  for (std::size_t i = 0; i < cand_embs.size(); ++i) check(cand_embs[i], "candidate " + std::to_string(i));
}

SampledPrompts top_k_by_similarity(const CandidatePool& pool, SimilarityTarget target, std::size_t k) {
  require_k(k);
  pool.check_embeddings();
  const EmbeddingVector& ref = target == SimilarityTarget::Text ? pool.x_t : pool.x_m;
  std::vector<double> sims(pool.candidates.size());
  for (std::size_t i = 0; i < sims.size(); ++i) sims[i] = cosine_similarity(pool.cand_embs[i], ref);
  std::vector<std::size_t> order(sims.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
  order.resize(std::min(k, order.size()));
  return make_result(pool, target == SimilarityTarget::Text ? SamplingStrategy::TextSim
                                                            : SamplingStrategy::ModalitySim,
                     std::move(order));
}

SampledPrompts random_sample(const CandidatePool& pool, std::size_t k, std::uint64_t seed) {
  require_k(k);
  if (pool.candidates.empty()) throw Error("pool '" + pool.prompt_id + "' is empty");
  std::vector<std::size_t> idx(pool.candidates.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t take = std::min(k, idx.size());
  Rng rng(seed);
  // Partial Fisher-Yates; the first `take` slots are the draws in order.
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  return make_result(pool, SamplingStrategy::Random, std::move(idx));
}

double joint_sim(const EmbeddingVector& cand, const EmbeddingVector& x_t, const EmbeddingVector& x_m) {
  return cosine_similarity(cand, x_t) + cosine_similarity(cand, x_m);
}

WeightTerm diversity_term(const EmbeddingVector& cand, const EmbeddingVector& x_t, const EmbeddingVector& x_m,
                          std::span<const EmbeddingVector* const> sampled, const SamplerOptions& options) {
  const double eps = options.epsilon;
  const double js = joint_sim(cand, x_t, x_m);
  WeightTerm term;
  term.clamped = js <= eps;
  const double numerator = std::max(js, eps);
  if (sampled.empty()) {
    term.weight = numerator;
    return term;
  }
  const EmbeddingVector& reference = options.reference == DiversityReference::Candidate ? cand : x_t;
  double total = 0.0;
  for (const auto* s : sampled) total += cosine_similarity(reference, *s);
  const double mean = total / static_cast<double>(sampled.size());
  term.weight = numerator / std::max(mean, eps);
  return term;
}

double diversity_weight(const EmbeddingVector& cand, const EmbeddingVector& x_t, const EmbeddingVector& x_m,
                        std::span<const EmbeddingVector* const> sampled, const SamplerOptions& options) {
  return diversity_term(cand, x_t, x_m, sampled, options).weight;
}

DrawWeights joint_diverse_weights(const CandidatePool& pool, std::span<const std::size_t> remaining,
                                  std::span<const std::size_t> drawn, const SamplerOptions& options) {
  std::vector<const EmbeddingVector*> sampled;
  sampled.reserve(drawn.size());
  for (auto i : drawn) sampled.push_back(&pool.cand_embs[i]);
  DrawWeights out;
  out.weights.reserve(remaining.size());
  bool all_clamped = true;
  for (auto i : remaining) {
    const auto term = diversity_term(pool.cand_embs[i], pool.x_t, pool.x_m, sampled, options);
    out.weights.push_back(term.weight);
    all_clamped = all_clamped && term.clamped;
  }
  if (all_clamped && !remaining.empty()) {
    std::fill(out.weights.begin(), out.weights.end(), 1.0);
    out.uniform_fallback = true;
  }
  return out;
}

SampledPrompts joint_diverse_sample(const CandidatePool& pool, std::size_t k, std::uint64_t seed,
                                    const SamplerOptions& options) {
  require_k(k);
  if (pool.candidates.empty()) throw Error("pool '" + pool.prompt_id + "' is empty");
  pool.check_embeddings();
  std::vector<std::size_t> remaining(pool.candidates.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<std::size_t> drawn;
  bool fallback = false;
  Rng rng(seed);
  const std::size_t take = std::min(k, remaining.size());
  while (drawn.size() < take) {
    const DrawWeights w = joint_diverse_weights(pool, remaining, drawn, options);
    fallback = fallback || w.uniform_fallback;
    const double total = std::accumulate(w.weights.begin(), w.weights.end(), 0.0);
    const double target = rng.uniform() * total;
    std::size_t pick = remaining.size() - 1;
    double cumulative = 0.0;
    for (std::size_t j = 0; j < w.weights.size(); ++j) {
      cumulative += w.weights[j];
      if (target < cumulative) {
        pick = j;
        break;
      }
    }
    drawn.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  auto out = make_result(pool, SamplingStrategy::JointDiverse, std::move(drawn));
  out.uniform_fallback = fallback;
  return out;
}

SampleAllResult sample_all(std::span<const QAItem> items, const std::map<std::string, PerturbationSet>& sets,
                           const EmbeddingStore& store, SamplingStrategy strategy, std::size_t k,
                           std::uint64_t seed, const SamplerOptions& options) {
  require_k(k);
  SampleAllResult result;
  const bool needs_text = strategy == SamplingStrategy::TextSim || strategy == SamplingStrategy::JointDiverse;
  const bool needs_modality =
      strategy == SamplingStrategy::ModalitySim || strategy == SamplingStrategy::JointDiverse;
  const bool needs_candidates = strategy != SamplingStrategy::Random;
  const std::string stage = "sample/" + std::string(to_string(strategy));

  for (const auto& item : items) {
    auto set_it = sets.find(item.id);
    if (set_it == sets.end() || set_it->second.candidates.empty()) {
      result.incomplete.push_back(item.id + ": no perturbation set");
      continue;
    }
    CandidatePool pool;
    pool.prompt_id = item.id;
    pool.candidates = set_it->second.candidates;

    std::vector<std::string> missing;
    auto fetch = [&](const std::string& role) -> const EmbeddingVector* {
      const auto* v = store.find({item.id, role});
      if (!v) missing.push_back(role);
      return v;
    };
    if (needs_text)
      if (const auto* v = fetch(std::string(role::kText))) pool.x_t = *v;
    if (needs_modality)
      if (const auto* v = fetch(std::string(role::kModality))) pool.x_m = *v;
    if (needs_candidates) {
      for (std::size_t i = 0; i < pool.candidates.size(); ++i)
        if (const auto* v = fetch(role::perturbation(i))) pool.cand_embs.push_back(*v);
    }
    if (!missing.empty()) {
      std::string msg = item.id + ": missing embeddings";
      for (const auto& m : missing) msg += " " + m;
      result.incomplete.push_back(std::move(msg));
      continue;
    }
    // Strategies that ignore one reference still need a valid pool.
    if (!needs_text && needs_modality) pool.x_t = pool.x_m;
    if (needs_text && !needs_modality) pool.x_m = pool.x_t;

    const std::uint64_t item_seed = derive_seed(seed, stage, item.id);
    try {
      SampledPrompts s;
      switch (strategy) {
        case SamplingStrategy::TextSim: s = top_k_by_similarity(pool, SimilarityTarget::Text, k); break;
        case SamplingStrategy::ModalitySim: s = top_k_by_similarity(pool, SimilarityTarget::Modality, k); break;
        case SamplingStrategy::Random: s = random_sample(pool, k, item_seed); break;
        case SamplingStrategy::JointDiverse: s = joint_diverse_sample(pool, k, item_seed, options); break;
      }
      result.selections.emplace(item.id, std::move(s));
    } catch (const Error& e) {
      result.incomplete.push_back(item.id + ": " + e.what());
    }
  }
  std::sort(result.incomplete.begin(), result.incomplete.end());
  return result;
}

}  // namespace gpert

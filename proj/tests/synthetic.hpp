#pragma once

// Generators for synthetic test data with known structure.

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace synthetic {

struct Bundles {
  std::vector<std::vector<double>> points;
  std::vector<int> truth;
};

// Three tight bundles of directions around the coordinate axes of R^3, with
// gaussian jitter of the given spread and random positive lengths.
inline Bundles direction_bundles(std::size_t per_bundle, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, spread);
  std::uniform_real_distribution<double> length(0.5, 2.0);
  Bundles b;
  for (int bundle = 0; bundle < 3; ++bundle) {
    for (std::size_t i = 0; i < per_bundle; ++i) {
      std::vector<double> p(3);
      for (int c = 0; c < 3; ++c) p[c] = (c == bundle ? 1.0 : 0.0) + jitter(rng);
      const double len = length(rng);
      for (auto& x : p) x *= len;
      b.points.push_back(p);
      b.truth.push_back(bundle);
    }
  }
  return b;
}

// Fraction of point pairs on which two labelings agree about "same cluster".
// Noise (-1) is never in the same cluster as anything.
inline double pair_agreement(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] >= 0 && a[i] == a[j];
      const bool sb = b[i] >= 0 && b[i] == b[j];
      agree += sa == sb;
      ++total;
    }
  return total ? static_cast<double>(agree) / static_cast<double>(total) : 1.0;
}

// True when a bijection of cluster ids maps a onto b, with noise fixed.
inline bool equal_up_to_bijection(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> fwd, rev;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [f, fi] = fwd.emplace(a[i], b[i]);
    auto [r, ri] = rev.emplace(b[i], a[i]);
    if (f->second != b[i] || r->second != a[i]) return false;
  }
  return true;
}

// A QA dataset in JSONL form, modalities round-robin over image/audio/video.
inline std::string qa_jsonl(std::size_t n, std::uint64_t seed) {
  static const char* subjects[] = {"person", "dog", "woman", "man", "child", "car", "bird", "girl"};
  static const char* verbs[] = {"holding", "eating", "wearing", "looking at", "using"};
  static const char* objects[] = {"a cup", "a ball", "a red hat", "a phone", "a stick", "an apple"};
  static const char* mods[] = {"image", "audio", "video"};
  std::mt19937_64 rng(seed);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    const char* m = mods[i % 3];
    const std::string subject = subjects[rng() % 8], verb = verbs[rng() % 5], object = objects[rng() % 6];
    char id[32];
    std::snprintf(id, sizeof id, "item%03zu", i);
    out += std::string("{\"id\":\"") + id + "\",\"modality\":\"" + m + "\",\"data_ref\":\"" + m + "/" + id +
           ".bin\",\"prompt\":\"What is the " + subject + " " + verb + " in the " + m + " " + std::to_string(i) +
           "?\",\"answer\":\"The " + subject + " is " + verb + " " + object + "\"}\n";
  }
  return out;
}

}  // namespace synthetic

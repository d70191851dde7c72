#include <doctest.h>

#include <random>

#include "gpert/error.hpp"
#include "gpert/hashing.hpp"
#include "gpert/metrics.hpp"
#include "oracles.hpp"

using namespace gpert;

namespace {

std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len) {
  static const char* vocab[] = {"a", "b", "c", "d", "e"};
  std::vector<std::string> out(rng() % (max_len + 1));
  for (auto& t : out) t = vocab[rng() % 5];
  return out;
}

}  // namespace

TEST_CASE("bleu hand cases") {
  CHECK(bleu("the cat", "the cat sat", {2, true}) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(std::abs(bleu("the cat", "the cat sat", {2, false}) - 0.60653) < 1e-5);
  CHECK(bleu("the cat sat on the mat", "the cat sat on the mat") == doctest::Approx(1.0));
  CHECK(bleu("", "anything") == 0.0);
  // Without smoothing a missing bigram match zeroes the score.
  CHECK(bleu("cat the", "the cat", {2, false}) == 0.0);
  CHECK(bleu("cat the", "the cat", {2, true}) > 0.0);
}

TEST_CASE("bleu clips repeated n-grams") {
  // 7 "the" against a reference with 2: unigram precision 2/7.
  CHECK(bleu("the the the the the the the", "the cat is on the mat", {1, true}) ==
        doctest::Approx(2.0 / 7.0));
}

TEST_CASE("bleu tokenization folds case and splits punctuation") {
  CHECK(bleu("The CAT.", "the cat .") == doctest::Approx(1.0));
  CHECK(bleu("Straße", "STRASSE") == 0.0);  // simple folding keeps ß
}

TEST_CASE("bleu matches the counting oracle on random pairs") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = random_tokens(rng, 12), r = random_tokens(rng, 12);
    for (bool smooth : {true, false}) {
      const BleuOptions opts{4, smooth};
      CHECK(bleu_tokens(c, r, opts) == doctest::Approx(oracle::bleu(c, r, 4, smooth)).epsilon(1e-12));
    }
  }
}

TEST_CASE("bleu stays in [0, 1]") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = random_tokens(rng, 15), r = random_tokens(rng, 15);
    const double v = bleu_tokens(c, r);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("rouge-l hand cases") {
  CHECK(rouge_l("a b c", "a c") == doctest::Approx(0.8));
  CHECK(rouge_l("a b", "c d") == 0.0);
  CHECK(rouge_l("", "a") == 0.0);
  CHECK(rouge_l("x y z", "X Y Z") == doctest::Approx(1.0));
}

TEST_CASE("lcs and rouge-l match subsequence enumeration") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = random_tokens(rng, 10), r = random_tokens(rng, 10);
    CHECK(lcs_length(c, r) == oracle::lcs(c, r));
    CHECK(rouge_l_tokens(c, r) == doctest::Approx(oracle::rouge_l(c, r)).epsilon(1e-12));
  }
}

TEST_CASE("rouge-l is symmetric in its arguments") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_tokens(rng, 10), r = random_tokens(rng, 10);
    CHECK(rouge_l_tokens(c, r) == doctest::Approx(rouge_l_tokens(r, c)));
  }
}

TEST_CASE("greedy match f1") {
  // Identity similarity: every token matches itself perfectly.
  CHECK(greedy_match_f1({{1, -1}, {-1, 1}}) == doctest::Approx(1.0));
  // One reference row, two candidate columns with rescaled sims 1 and 0.5.
  // recall = 1, precision = 0.75, F1 = 6/7.
  CHECK(greedy_match_f1({{1, 0}}) == doctest::Approx(6.0 / 7.0));
  CHECK(greedy_match_f1({{0}}) == doctest::Approx(0.5));
  CHECK(greedy_match_f1({}) == 0.0);
  CHECK_THROWS_AS(greedy_match_f1({{1, 0}, {1}}), Error);
}

TEST_CASE("semantic f1 with a stub embedder") {
  auto embed = [](std::string_view t) {
    std::vector<double> v(16);
    const auto key = hash_bytes(t);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = counter_normal(key, i);
    return EmbeddingVector(v);
  };
  CHECK(semantic_f1("red ball", "red ball", embed) == doctest::Approx(1.0));
  CHECK(semantic_f1("", "red ball", embed) == 0.0);
  const double partial = semantic_f1("red cup", "red ball", embed);
  CHECK(partial < 1.0);
  CHECK(partial > 0.0);
}

TEST_CASE("score record json validates range") {
  ScoreRecord r{"q1", "original", -1, "bleu", 0.5, "m"};
  nlohmann::json j = r;
  CHECK(j.get<ScoreRecord>() == r);
  j["value"] = 1.5;
  CHECK_THROWS_AS(j.get<ScoreRecord>(), Error);
}

TEST_CASE("summarize") {
  const double v[] = {0.2, 0.4, 0.6};
  const auto s = summarize(v);
  CHECK(s.mean == doctest::Approx(0.4));
  CHECK(s.std_err == doctest::Approx(0.2 / std::sqrt(3.0)));
  CHECK(s.n == 3);
  CHECK_FALSE(s.single_sample);

  const double one[] = {1.0};
  const auto s1 = summarize(one);
  CHECK(s1.mean == 1.0);
  CHECK(s1.std_err == 0.0);
  CHECK(s1.single_sample);
  CHECK_THROWS_AS(summarize(std::span<const double>{}), Error);
}

TEST_CASE("coefficient of variation modes") {
  const double v[] = {0.2, 0.4, 0.6};
  CHECK(coefficient_of_variation(v, CvMode::VarianceOverMean) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(coefficient_of_variation(v, CvMode::StdOverMean) == doctest::Approx(0.5).epsilon(1e-12));
  const double scaled[] = {0.6, 1.2, 1.8};
  CHECK(coefficient_of_variation(scaled, CvMode::VarianceOverMean) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(coefficient_of_variation(scaled, CvMode::StdOverMean) == doctest::Approx(0.5).epsilon(1e-12));
  const double flat[] = {0.5, 0.5, 0.5};
  CHECK(coefficient_of_variation(flat, CvMode::VarianceOverMean) == 0.0);
  CHECK(coefficient_of_variation(flat, CvMode::StdOverMean) == 0.0);
  const double one[] = {0.5};
  CHECK_THROWS_AS(coefficient_of_variation(one), Error);
  const double zero[] = {-1.0, 1.0};
  CHECK_THROWS_AS(coefficient_of_variation(zero), Error);
}

TEST_CASE("degradation delta") {
  CHECK(degradation_delta(0.6878, 0.3470) == doctest::Approx(0.4955).epsilon(1e-4));
  CHECK(degradation_delta(0.4647, 0.3832) == doctest::Approx(0.1754).epsilon(1e-3));
  CHECK(degradation_delta(0.5, 0.5) == 0.0);
  CHECK_THROWS_AS(degradation_delta(0.0, 0.1), Error);
}

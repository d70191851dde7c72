#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gpert/error.hpp"
#include "gpert/http.hpp"
#include "gpert/types.hpp"

namespace gpert {

struct PerturbProviderSpec {
  PerturbMethod kind = PerturbMethod::Stub;
  // One URL for llm-paraphrase / paraphraser, (forward, backward) for
  // back-translation.
  std::vector<std::string> endpoints;
  // llm-paraphrase only; must contain {prompt} and {n}.
  std::string instruction_template;
  int max_retries = 2;
  std::chrono::milliseconds timeout{60000};
  std::string source_lang = "en";
  std::string pivot_lang = "ru";
  // Required by the stub; also seeds padding for the remote kinds.
  std::optional<std::uint64_t> seed;

  std::vector<std::string> problems() const;
};

// Raised when fewer than the requested number of items could be produced.
// partial() holds what was obtained.
class ShortfallError : public Error {
 public:
  ShortfallError(std::string what, std::vector<std::string> partial)
      : Error(std::move(what)), partial_(std::move(partial)) {}
  const std::vector<std::string>& partial() const { return partial_; }

 private:
  std::vector<std::string> partial_;
};

// Non-blank lines with a leading "<digits>." or "<digits>)" marker removed and
// whitespace trimmed, in order.
std::vector<std::string> parse_numbered_lines(std::string_view raw);

// First n entries of parse_numbered_lines. Throws ParseError on empty input
// and ShortfallError when fewer than n lines parse.
std::vector<std::string> parse_numbered_list(std::string_view raw, std::size_t n);

// Replaces every {prompt} and {n} placeholder.
std::string expand_template(std::string_view tmpl, std::string_view prompt, std::size_t n);

// Deterministic rule-based rewrites (synonyms, article toggle, clause reorder,
// lead-in and trailing phrases), lowercased, distinct from each other and from
// the prompt under case folding. Throws ShortfallError when n distinct
// variants cannot be reached.
std::vector<std::string> stub_perturb(std::string_view prompt, std::size_t n, std::uint64_t seed);

class PerturbationGenerator {
 public:
  explicit PerturbationGenerator(PerturbProviderSpec spec, http::Post post = {},
                                 http::AuditLog* audit = nullptr);

  const PerturbProviderSpec& spec() const { return spec_; }

  // Exactly n candidates or an exception. Duplicate or echoed provider output
  // triggers a re-request; after max_retries the set is padded from the stub
  // and flagged.
  PerturbationSet generate(const QAItem& item, std::size_t n) const;

  // Forward then backward translation. Errors name the failing leg.
  std::string back_translate(std::string_view prompt) const;

 private:
  std::vector<std::string> request_batch(const QAItem& item, std::size_t needed) const;
  std::string translate(std::string_view text, const std::string& url, const std::string& from,
                        const std::string& to) const;

  PerturbProviderSpec spec_;
  http::Post post_;
  http::AuditLog* audit_;
};

}  // namespace gpert

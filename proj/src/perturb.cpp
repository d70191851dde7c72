#include "gpert/perturb.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <string_view>
#include <unordered_map>

#include "gpert/hashing.hpp"
#include "gpert/text.hpp"

namespace gpert {

namespace {

struct SynonymEntry {
  std::string_view word;
  std::array<std::string_view, 3> alternatives;  // empty slots unused
};

constexpr SynonymEntry kSynonyms[] = {
    {"person", {"individual", "human", ""}},
    {"people", {"individuals", "persons", ""}},
    {"holding", {"grasping", "gripping", "clutching"}},
    {"holds", {"grasps", "grips", ""}},
    {"color", {"colour", "shade", "hue"}},
    {"colour", {"color", "shade", ""}},
    {"wearing", {"dressed in", "sporting", ""}},
    {"man", {"guy", "gentleman", ""}},
    {"woman", {"lady", ""}},
    {"girl", {"young woman", "lass", ""}},
    {"boy", {"young man", "lad", ""}},
    {"picture", {"image", "photo", ""}},
    {"image", {"picture", "photo", ""}},
    {"photo", {"picture", "image", ""}},
    {"video", {"clip", "footage", ""}},
    {"shown", {"depicted", "visible", ""}},
    {"doing", {"performing", "carrying out", ""}},
    {"kind", {"type", "sort", ""}},
    {"type", {"kind", "sort", ""}},
    {"object", {"item", "thing", ""}},
    {"item", {"object", "thing", ""}},
    {"thing", {"object", "item", ""}},
    {"large", {"big", "sizable", ""}},
    {"big", {"large", "sizable", ""}},
    {"small", {"little", "tiny", ""}},
    {"use", {"utilize", "employ", ""}},
    {"used", {"utilized", "employed", ""}},
    {"working", {"operating", "laboring", ""}},
    {"sitting", {"seated", ""}},
    {"made", {"constructed", "built", ""}},
    {"tool", {"device", "instrument", "implement"}},
    {"device", {"tool", "gadget", ""}},
    {"room", {"space", "area", ""}},
    {"place", {"location", "spot", ""}},
    {"street", {"road", ""}},
    {"car", {"vehicle", "automobile", ""}},
    {"vehicle", {"car", "automobile", ""}},
    {"animal", {"creature", ""}},
    {"largest", {"biggest", ""}},
    {"main", {"primary", "principal", ""}},
    {"called", {"named", "known as", ""}},
    {"happened", {"occurred", "took place", ""}},
    {"looking", {"gazing", "staring", ""}},
    {"eating", {"consuming", "having", ""}},
    {"food", {"meal", "dish", ""}},
    {"home", {"house", ""}},
};

constexpr std::string_view kLeadIns[] = {
    "can you tell me", "please tell me", "tell me", "do you know",
    "could you say",   "i wonder",       "any idea", "quick question:",
};

constexpr std::string_view kTrailing[] = {
    "in this scene", "here",         "exactly",     "right now",   "in the picture", "at the moment",
    "in this case",  "specifically", "precisely",   "currently",   "shown here",     "in the data",
    "in view",       "overall",      "in particular", "at present",
};

constexpr std::string_view kPrepositions[] = {"in",    "on",     "at",    "with",   "near",  "beside",
                                              "behind", "under", "from", "inside", "during"};

const SynonymEntry* find_synonym(std::string_view word) {
  for (const auto& e : kSynonyms)
    if (e.word == word) return &e;
  return nullptr;
}

std::size_t alternative_count(const SynonymEntry& e) {
  std::size_t n = 0;
  for (auto a : e.alternatives)
    if (!a.empty()) ++n;
  return n;
}

bool is_article(std::string_view w) { return w == "a" || w == "an" || w == "the"; }

bool is_preposition(std::string_view w) {
  return std::find(std::begin(kPrepositions), std::end(kPrepositions), w) != std::end(kPrepositions);
}

bool starts_with_vowel(std::string_view w) {
  return !w.empty() && std::string_view("aeiou").find(w.front()) != std::string_view::npos;
}

struct SplitPrompt {
  std::vector<std::string> words;
  std::string terminal;  // trailing ?, . or ! stripped off the last word
};

SplitPrompt split_prompt(std::string_view prompt) {
  SplitPrompt sp;
  sp.words = text::tokens(text::casefold(text::nfc(prompt)));
  while (!sp.words.empty()) {
    auto& last = sp.words.back();
    while (!last.empty() && (last.back() == '?' || last.back() == '.' || last.back() == '!')) {
      sp.terminal.insert(sp.terminal.begin(), last.back());
      last.pop_back();
    }
    if (!last.empty()) break;
    sp.words.pop_back();
  }
  return sp;
}

std::string join(const std::vector<std::string>& words, std::string_view terminal) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  out += terminal;
  return out;
}

std::vector<std::string> rewrite(const SplitPrompt& base, Rng& rng) {
  std::vector<std::string> words = base.words;

  for (auto& w : words) {
    if (const auto* syn = find_synonym(w); syn && rng.uniform() < 0.5)
      w = std::string(syn->alternatives[rng.below(alternative_count(*syn))]);
  }

  std::vector<std::size_t> articles;
  for (std::size_t i = 0; i < words.size(); ++i)
    if (is_article(words[i])) articles.push_back(i);
  if (!articles.empty() && rng.uniform() < 0.3) {
    const std::size_t i = articles[rng.below(articles.size())];
    if (words[i] == "the") {
      const bool vowel = i + 1 < words.size() && starts_with_vowel(words[i + 1]);
      words[i] = vowel ? "an" : "a";
    } else {
      words[i] = "the";
    }
  }

  std::size_t prep = 0;
  for (std::size_t i = 2; i + 1 < words.size(); ++i) {
    if (is_preposition(words[i])) {
      prep = i;
      break;
    }
  }
  if (prep != 0 && rng.uniform() < 0.25) {
    std::vector<std::string> moved(words.begin() + static_cast<std::ptrdiff_t>(prep), words.end());
    moved.back() += ",";
    moved.insert(moved.end(), words.begin(), words.begin() + static_cast<std::ptrdiff_t>(prep));
    words = std::move(moved);
  }

  if (rng.uniform() < 0.35) {
    const auto lead = kLeadIns[rng.below(std::size(kLeadIns))];
    words.insert(words.begin(), std::string(lead));
  }
  if (rng.uniform() < 0.5) {
    words.emplace_back(kTrailing[rng.below(std::size(kTrailing))]);
  }
  return words;
}

}  // namespace

std::vector<std::string> PerturbProviderSpec::problems() const {
  std::vector<std::string> out;
  switch (kind) {
    case PerturbMethod::LlmParaphrase:
      if (endpoints.size() != 1) out.emplace_back("llm-paraphrase requires exactly one endpoint");
      if (instruction_template.find("{prompt}") == std::string::npos ||
          instruction_template.find("{n}") == std::string::npos)
        out.emplace_back("llm-paraphrase template must contain {prompt} and {n}");
      break;
    case PerturbMethod::Paraphraser:
      if (endpoints.size() != 1) out.emplace_back("paraphraser requires exactly one endpoint");
      break;
    case PerturbMethod::BackTranslation:
      if (endpoints.size() != 2)
        out.emplace_back("back-translation requires exactly two endpoints (forward, backward)");
      break;
    case PerturbMethod::Stub:
      if (!seed) out.emplace_back("stub perturbation provider requires a seed");
      break;
  }
  if (max_retries < 0) out.emplace_back("max_retries must be non-negative");
  return out;
}

std::vector<std::string> parse_numbered_lines(std::string_view raw) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    const auto nl = raw.find('\n', pos);
    std::string_view line = raw.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? raw.size() + 1 : nl + 1;

    std::string trimmed = text::trim(line);
    std::size_t digits = 0;
    while (digits < trimmed.size() && std::isdigit(static_cast<unsigned char>(trimmed[digits]))) ++digits;
    if (digits > 0 && digits < trimmed.size() && (trimmed[digits] == '.' || trimmed[digits] == ')'))
      trimmed = text::trim(std::string_view(trimmed).substr(digits + 1));
    if (!trimmed.empty()) out.push_back(std::move(trimmed));
  }
  return out;
}

std::vector<std::string> parse_numbered_list(std::string_view raw, std::size_t n) {
  if (text::is_blank(raw)) throw ParseError("empty input");
  auto lines = parse_numbered_lines(raw);
  if (lines.size() < n) {
    std::string msg = "expected " + std::to_string(n) + ", parsed " + std::to_string(lines.size());
    throw ShortfallError(std::move(msg), std::move(lines));
  }
  lines.resize(n);
  return lines;
}

std::string expand_template(std::string_view tmpl, std::string_view prompt, std::size_t n) {
  std::string out;
  const std::string count = std::to_string(n);
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl.substr(i, 8) == "{prompt}") {
      out += prompt;
      i += 8;
    } else if (tmpl.substr(i, 3) == "{n}") {
      out += count;
      i += 3;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

std::vector<std::string> stub_perturb(std::string_view prompt, std::size_t n, std::uint64_t seed) {
  std::vector<std::string> out;
  if (n == 0) return out;
  const SplitPrompt base = split_prompt(prompt);
  if (base.words.empty()) throw ShortfallError("stub_perturb: prompt has no tokens", {});

  std::set<std::string> seen{text::comparison_key(prompt)};
  Rng rng(hash_parts(seed, {"stub-perturb", prompt}));
  const std::size_t max_attempts = 256 + 64 * n;
  for (std::size_t attempt = 0; attempt < max_attempts && out.size() < n; ++attempt) {
    std::string candidate = text::casefold(join(rewrite(base, rng), base.terminal));
    if (seen.insert(text::comparison_key(candidate)).second) out.push_back(std::move(candidate));
  }
  if (out.size() < n)
    throw ShortfallError("stub_perturb: reached " + std::to_string(out.size()) + " of " + std::to_string(n) +
                             " distinct variants",
                         std::move(out));
  return out;
}

PerturbationGenerator::PerturbationGenerator(PerturbProviderSpec spec, http::Post post, http::AuditLog* audit)
    : spec_(std::move(spec)), post_(std::move(post)), audit_(audit) {
  if (auto p = spec_.problems(); !p.empty()) throw ValidationError(std::move(p));
  if (spec_.kind != PerturbMethod::Stub && !post_) post_ = http::make_post();
}

std::string PerturbationGenerator::translate(std::string_view text, const std::string& url,
                                             const std::string& from, const std::string& to) const {
  http::CallOptions opts{"back-translation", spec_.timeout, spec_.max_retries, audit_};
  const auto reply =
      http::post_json(post_, url, {{"text", std::string(text)}, {"source_lang", from}, {"target_lang", to}}, opts);
  if (!reply.contains("text") || !reply["text"].is_string())
    throw ProviderError("translation response lacks a text field");
  return reply["text"].get<std::string>();
}

std::string PerturbationGenerator::back_translate(std::string_view prompt) const {
  if (spec_.kind != PerturbMethod::BackTranslation)
    throw Error("back_translate requires a back-translation provider");
  std::string pivot;
  try {
    pivot = translate(prompt, spec_.endpoints[0], spec_.source_lang, spec_.pivot_lang);
  } catch (const Error& e) {
    throw ProviderError("back-translation forward leg (" + spec_.source_lang + "->" + spec_.pivot_lang +
                        ") failed: " + e.what());
  }
  try {
    return translate(pivot, spec_.endpoints[1], spec_.pivot_lang, spec_.source_lang);
  } catch (const Error& e) {
    throw ProviderError("back-translation backward leg (" + spec_.pivot_lang + "->" + spec_.source_lang +
                        ") failed: " + e.what());
  }
}

std::vector<std::string> PerturbationGenerator::request_batch(const QAItem& item, std::size_t needed) const {
  if (spec_.kind == PerturbMethod::BackTranslation) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < needed; ++i) out.push_back(back_translate(item.prompt));
    return out;
  }
  nlohmann::json request;
  if (spec_.kind == PerturbMethod::LlmParaphrase)
    request = {{"prompt", expand_template(spec_.instruction_template, item.prompt, needed)}};
  else
    request = {{"prompt", item.prompt}, {"n", needed}};
  http::CallOptions opts{std::string(to_string(spec_.kind)), spec_.timeout, spec_.max_retries, audit_};
  const auto reply = http::post_json(post_, spec_.endpoints[0], request, opts);
  if (!reply.contains("text") || !reply["text"].is_string())
    throw ProviderError(std::string(to_string(spec_.kind)) + " response lacks a text field");
  return parse_numbered_lines(reply["text"].get<std::string>());
}

PerturbationSet PerturbationGenerator::generate(const QAItem& item, std::size_t n) const {
  if (n == 0) throw Error("generate_perturbations: n must be at least 1");
  PerturbationSet set;
  set.prompt_id = item.id;
  set.method = spec_.kind;

  if (spec_.kind == PerturbMethod::Stub) {
    try {
      set.candidates = stub_perturb(item.prompt, n, *spec_.seed);
    } catch (const ShortfallError& e) {
      throw Error("item '" + item.id + "': " + e.what());
    }
    return set;
  }

  std::set<std::string> seen{text::comparison_key(item.prompt)};
  auto accept = [&](std::string candidate) {
    if (set.candidates.size() >= n || text::is_blank(candidate)) return;
    if (seen.insert(text::comparison_key(candidate)).second) set.candidates.push_back(std::move(candidate));
  };

  for (int attempt = 0; attempt <= spec_.max_retries && set.candidates.size() < n; ++attempt) {
    for (auto& c : request_batch(item, n - set.candidates.size())) accept(std::move(c));
  }

  if (set.candidates.size() < n) {
    set.padded = true;
    const std::uint64_t pad_seed = spec_.seed.value_or(0);
    std::vector<std::string> pad;
    try {
      pad = stub_perturb(item.prompt, n + seen.size() + 16, pad_seed);
    } catch (const ShortfallError& e) {
      pad = e.partial();
    }
    for (auto& c : pad) accept(std::move(c));
    if (set.candidates.size() < n)
      throw ShortfallError("item '" + item.id + "': only " + std::to_string(set.candidates.size()) + " of " +
                               std::to_string(n) + " distinct perturbations even with padding",
                           set.candidates);
  }
  return set;
}

}  // namespace gpert

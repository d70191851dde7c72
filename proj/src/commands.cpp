#include "gpert/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <set>

#include "gpert/analysis.hpp"
#include "gpert/digest.hpp"
#include "gpert/error.hpp"
#include "gpert/hashing.hpp"
#include "gpert/parallel.hpp"
#include "gpert/report.hpp"
#include "gpert/sampler.hpp"
#include "gpert/text.hpp"
#include "gpert/validate.hpp"

namespace gpert {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kNoTraining = "no-training";

// Probability that the echo model answers correctly, by condition and by
// whether the prompt it sees is the original one.
std::pair<double, double> echo_accuracy(const std::string& condition) {
  if (condition == kNoTraining) return {0.35, 0.2};
  if (condition == kOriginalCondition) return {0.85, 0.45};
  return {0.8, 0.7};
}

struct Settings {
  PipelineConfig pipeline;
  std::size_t parallelism = 4;
  fs::path out_dir = "gpert-out";
  json embedding = json::object();
  json perturb = json::object();
  json metrics = json::object();
  json analysis = json::object();
  std::optional<std::string> api_key;

  // Everything that affects outputs; out_dir and credentials are left out.
  json snapshot() const {
    return {{"pipeline", pipeline}, {"parallelism", parallelism}, {"embedding", embedding},
            {"perturb", perturb},   {"metrics", metrics},         {"analysis", analysis}};
  }
};

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t parallelism = 0;
  std::string out_dir;
  std::string provider;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* parallelism_opt = nullptr;
  CLI::Option* out_dir_opt = nullptr;
};

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("invalid " + what + " '" + s + "'");
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string::npos) end = s.size();
    auto part = text::trim(std::string_view(s).substr(start, end - start));
    if (!part.empty()) out.emplace_back(part);
    start = end + 1;
  }
  return out;
}

Settings resolve_settings(const CommonFlags& flags) {
  Settings s;
  if (!flags.config.empty()) {
    json file;
    try {
      file = json::parse(read_file(flags.config));
    } catch (const json::exception& e) {
      throw Error("config " + flags.config + ": " + e.what());
    }
    if (!file.is_object()) throw Error("config " + flags.config + ": expected a JSON object");
    if (file.contains("pipeline")) s.pipeline = file["pipeline"].get<PipelineConfig>();
    if (file.contains("parallelism")) s.parallelism = file["parallelism"].get<std::size_t>();
    if (file.contains("out_dir")) s.out_dir = file["out_dir"].get<std::string>();
    for (auto [key, target] : {std::pair{"embedding", &s.embedding}, std::pair{"perturb", &s.perturb},
                               std::pair{"metrics", &s.metrics}, std::pair{"analysis", &s.analysis}})
      if (file.contains(key)) target->merge_patch(file[key]);
  }

  if (auto v = env("GPERT_SEED")) s.pipeline.rng_seed = parse_u64(*v, "GPERT_SEED");
  if (auto v = env("GPERT_PARALLELISM")) s.parallelism = parse_u64(*v, "GPERT_PARALLELISM");
  if (auto v = env("GPERT_OUT_DIR")) s.out_dir = *v;
  if (auto v = env("GPERT_EMBED_ENDPOINT")) s.embedding["endpoint"] = *v;
  if (auto v = env("GPERT_PERTURB_ENDPOINT")) s.perturb["endpoints"] = split_list(*v);
  s.api_key = env("GPERT_API_KEY");

  if (flags.seed_opt->count()) s.pipeline.rng_seed = flags.seed;
  if (flags.parallelism_opt->count()) s.parallelism = flags.parallelism;
  if (flags.out_dir_opt->count()) s.out_dir = flags.out_dir;

  auto problems = s.pipeline.problems();
  if (s.parallelism == 0) problems.push_back("parallelism must be at least 1");
  if (!problems.empty()) throw ValidationError(problems);
  return s;
}

std::uint64_t stub_seed(const json& section, std::uint64_t root, std::string_view stage) {
  if (section.contains("seed")) return section["seed"].get<std::uint64_t>();
  return derive_seed(root, stage, "stub");
}

EmbeddingProviderSpec embedding_spec(const Settings& s, const std::string& provider) {
  const json& j = s.embedding;
  EmbeddingProviderSpec spec;
  const std::string kind = provider.empty() ? j.value("kind", std::string("stub")) : provider;
  if (kind == "stub")
    spec.kind = EmbeddingProviderSpec::Kind::Stub;
  else if (kind == "remote")
    spec.kind = EmbeddingProviderSpec::Kind::Remote;
  else
    throw Error("unknown embedding provider '" + kind + "' (expected stub or remote)");
  spec.endpoint = j.value("endpoint", std::string());
  spec.dim = j.value("dim", spec.dim);
  spec.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
  spec.max_retries = j.value("max_retries", spec.max_retries);
  spec.max_in_flight = j.value("max_in_flight", spec.max_in_flight);
  spec.seed = stub_seed(j, s.pipeline.rng_seed, "embed");
  if (j.contains("modalities"))
    for (const auto& m : j["modalities"]) spec.modalities.push_back(parse_modality(m.get<std::string>()));
  return spec;
}

PerturbProviderSpec perturb_spec(const Settings& s, const std::string& provider) {
  const json& j = s.perturb;
  PerturbProviderSpec spec;
  spec.kind = parse_perturb_method(provider.empty() ? j.value("kind", std::string("stub")) : provider);
  if (j.contains("endpoints")) spec.endpoints = j["endpoints"].get<std::vector<std::string>>();
  spec.instruction_template = j.value("instruction_template", std::string());
  spec.max_retries = j.value("max_retries", spec.max_retries);
  spec.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
  spec.source_lang = j.value("source_lang", spec.source_lang);
  spec.pivot_lang = j.value("pivot_lang", spec.pivot_lang);
  spec.seed = stub_seed(j, s.pipeline.rng_seed, "perturb");
  return spec;
}

MetricsConfig metrics_config(const Settings& s) {
  const json& j = s.metrics;
  MetricsConfig m;
  m.bleu = j.value("bleu", true);
  m.rouge_l = j.value("rouge_l", true);
  m.semantic_f1 = j.value("semantic_f1", false);
  m.bleu_options.max_n = j.value("bleu_max_n", 4);
  m.bleu_options.smoothing = j.value("bleu_smoothing", true);
  return m;
}

class Manifest {
 public:
  explicit Manifest(fs::path dir) : dir_(std::move(dir)) {
    const auto file = dir_ / "manifest.json";
    if (fs::exists(file)) {
      data_ = json::parse(read_file(file), nullptr, false);
      if (data_.is_discarded() || !data_.is_object()) throw Error("corrupt manifest " + file.string());
    }
    for (const char* key : {"inputs", "artifacts", "stages"})
      if (!data_.contains(key)) data_[key] = json::object();
    if (!data_.contains("audit_logs")) data_["audit_logs"] = json::array();
  }

  void begin(const Settings& s) {
    data_["tool_version"] = std::string(kToolVersion);
    data_["config"] = s.snapshot();
  }

  void input(const fs::path& p) { data_["inputs"][p.generic_string()] = file_sha256(p); }

  void emit(const std::string& rel, std::string_view contents) {
    write_file(dir_ / rel, contents);
    data_["artifacts"][rel] = sha256_hex(contents);
  }

  void drop(const std::string& rel) {
    fs::remove(dir_ / rel);
    data_["artifacts"].erase(rel);
  }

  bool recorded(const std::string& rel) const { return data_["artifacts"].contains(rel); }

  // Conventional location of an upstream artifact, checked against its
  // recorded digest.
  fs::path require(const std::string& rel, std::string_view command) const {
    const auto path = dir_ / rel;
    const std::string hint = "; run `gpert " + std::string(command) + "` first";
    if (!fs::exists(path)) throw Error("missing upstream artifact " + path.string() + hint);
    if (!recorded(rel)) throw Error("upstream artifact " + path.string() + " is not in the manifest" + hint);
    if (file_sha256(path) != data_["artifacts"][rel].get<std::string>())
      throw Error("upstream artifact " + path.string() + " changed since it was recorded" + hint);
    return path;
  }

  fs::path resolve(const std::string& given, const std::string& rel, std::string_view command) {
    if (given.empty()) return require(rel, command);
    if (!fs::exists(given)) throw Error("no such file " + given);
    input(given);
    return given;
  }

  void stage(const std::string& name, const std::string& status, const std::vector<std::string>& outputs,
             json details = json::object(), const std::string& audit_log = {}) {
    json entry = {{"status", status}, {"outputs", outputs}, {"details", std::move(details)}};
    if (!audit_log.empty()) {
      entry["audit_log"] = audit_log;
      auto& logs = data_["audit_logs"];
      if (std::find(logs.begin(), logs.end(), audit_log) == logs.end()) logs.push_back(audit_log);
    }
    data_["stages"][name] = std::move(entry);
  }

  void save() const { write_file(dir_ / "manifest.json", data_.dump(2) + "\n"); }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  json data_ = json::object();
};

struct Context {
  Settings settings;
  std::string provider;
  Manifest manifest;

  const fs::path& out() const { return manifest.dir(); }
};

std::vector<QAItem> load_dataset(Context& ctx, const std::string& path) {
  if (path.empty()) throw Error("--dataset is required");
  auto items = load_qa_dataset(path);
  ctx.manifest.input(path);
  std::sort(items.begin(), items.end(), [](const QAItem& a, const QAItem& b) { return a.id < b.id; });
  return items;
}

std::string strategy_file(SamplingStrategy s) { return "sampled/" + std::string(to_string(s)) + ".jsonl"; }
std::string augmented_file(const std::string& condition) { return "augmented/" + condition + ".jsonl"; }

std::unique_ptr<http::AuditLog> open_audit(const Context& ctx, const std::string& stage, bool remote) {
  if (!remote) return nullptr;
  return std::make_unique<http::AuditLog>(ctx.out() / "audit" / (stage + ".jsonl"));
}

std::string audit_rel(const std::unique_ptr<http::AuditLog>& log, const std::string& stage) {
  return log ? "audit/" + stage + ".jsonl" : std::string();
}

// perturb ---------------------------------------------------------------

struct PerturbArgs {
  std::string dataset;
  std::size_t n = 0;
};

int cmd_perturb(Context& ctx, const PerturbArgs& args) {
  const auto items = load_dataset(ctx, args.dataset);
  const auto spec = perturb_spec(ctx.settings, ctx.provider);
  const std::size_t n = args.n ? args.n : ctx.settings.pipeline.n_perturbations;
  const bool remote = spec.kind != PerturbMethod::Stub;
  auto audit = open_audit(ctx, "perturb", remote);
  PerturbationGenerator gen(spec, remote ? http::make_post(ctx.settings.api_key) : http::Post{}, audit.get());

  std::vector<std::optional<PerturbationSet>> results(items.size());
  std::vector<std::string> errors(items.size());
  parallel_for(items.size(), ctx.settings.parallelism, [&](std::size_t i) {
    try {
      results[i] = gen.generate(items[i], n);
    } catch (const ShortfallError& e) {
      errors[i] = e.what();
      if (!e.partial().empty()) results[i] = PerturbationSet{items[i].id, spec.kind, e.partial(), false};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::map<std::string, PerturbationSet> sets;
  json status = json::object();
  std::size_t failed = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (results[i]) sets.emplace(items[i].id, *results[i]);
    if (!errors[i].empty()) {
      ++failed;
      status[items[i].id] = "error: " + errors[i];
      std::cerr << "perturb " << items[i].id << ": " << errors[i] << "\n";
    } else {
      status[items[i].id] = results[i]->padded ? "padded" : "ok";
    }
  }

  const std::string rel = "perturbations.jsonl";
  if (failed) {
    ctx.manifest.drop(rel);
    ctx.manifest.emit(rel + ".partial", serialize_perturbation_sets(sets));
    ctx.manifest.stage("perturb", "partial", {rel + ".partial"}, {{"items", status}, {"n", n}},
                       audit_rel(audit, "perturb"));
    std::cerr << failed << " of " << items.size() << " items failed; partial output in "
              << (ctx.out() / (rel + ".partial")).string() << "\n";
    return 1;
  }
  ctx.manifest.drop(rel + ".partial");
  ctx.manifest.emit(rel, serialize_perturbation_sets(sets));
  ctx.manifest.stage("perturb", "complete", {rel}, {{"items", status}, {"n", n}}, audit_rel(audit, "perturb"));
  std::cout << "perturb: " << items.size() * n << " candidates for " << items.size() << " items\n";
  return 0;
}

// embed -----------------------------------------------------------------

struct EmbedArgs {
  std::string dataset;
  std::string perturbations;
};

int cmd_embed(Context& ctx, const EmbedArgs& args) {
  const auto items = load_dataset(ctx, args.dataset);
  const auto sets =
      load_perturbation_sets(ctx.manifest.resolve(args.perturbations, "perturbations.jsonl", "perturb"));
  const auto spec = embedding_spec(ctx.settings, ctx.provider);
  const bool remote = spec.kind == EmbeddingProviderSpec::Kind::Remote;
  auto audit = open_audit(ctx, "embed", remote);
  EmbeddingProvider provider(spec, remote ? http::make_post(ctx.settings.api_key) : http::Post{}, audit.get());

  struct Task {
    EmbeddingKey key;
    const QAItem* item;
    std::string text;  // empty for the modality asset
  };
  std::vector<Task> tasks;
  for (const auto& item : items) {
    tasks.push_back({{item.id, std::string(role::kText)}, &item, item.prompt});
    tasks.push_back({{item.id, std::string(role::kModality)}, &item, {}});
    if (auto it = sets.find(item.id); it != sets.end())
      for (std::size_t i = 0; i < it->second.candidates.size(); ++i)
        tasks.push_back({{item.id, role::perturbation(i)}, &item, it->second.candidates[i]});
  }

  std::vector<std::optional<EmbeddingVector>> vectors(tasks.size());
  std::vector<std::string> errors(tasks.size());
  const std::size_t workers = remote ? std::min(ctx.settings.parallelism, spec.max_in_flight) : ctx.settings.parallelism;
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    const auto& t = tasks[i];
    try {
      vectors[i] = t.key.role == role::kModality ? provider.embed_asset(t.item->data_ref, t.item->modality)
                                                 : provider.embed_text(t.text);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  EmbeddingStore store;
  json failures = json::object();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (vectors[i])
      store.insert(tasks[i].key, *vectors[i]);
    else
      failures[tasks[i].key.item_id + "/" + tasks[i].key.role] = errors[i];
  }

  const std::string rel = "embeddings.store";
  const json details = {{"count", store.size()}, {"dim", store.dim()}, {"failures", failures}};
  if (!failures.empty()) {
    for (const auto& [k, v] : failures.items()) std::cerr << "embed " << k << ": " << v.get<std::string>() << "\n";
    ctx.manifest.drop(rel);
    ctx.manifest.emit(rel + ".partial", serialize_store(store));
    ctx.manifest.stage("embed", "partial", {rel + ".partial"}, details, audit_rel(audit, "embed"));
    return 1;
  }
  ctx.manifest.drop(rel + ".partial");
  ctx.manifest.emit(rel, serialize_store(store));
  ctx.manifest.stage("embed", "complete", {rel}, details, audit_rel(audit, "embed"));
  std::cout << "embed: " << store.size() << " vectors of dim " << store.dim() << "\n";
  return 0;
}

// sample ----------------------------------------------------------------

struct SampleArgs {
  std::string dataset;
  std::string perturbations;
  std::string embeddings;
  std::vector<std::string> strategies;
  std::size_t k = 0;
};

int cmd_sample(Context& ctx, const SampleArgs& args) {
  const auto items = load_dataset(ctx, args.dataset);
  const auto sets =
      load_perturbation_sets(ctx.manifest.resolve(args.perturbations, "perturbations.jsonl", "perturb"));
  std::vector<SamplingStrategy> strategies;
  for (const auto& s : args.strategies) strategies.push_back(parse_strategy(s));
  if (strategies.empty()) strategies.assign(std::begin(kAllStrategies), std::end(kAllStrategies));

  const bool need_store = std::any_of(strategies.begin(), strategies.end(),
                                      [](SamplingStrategy s) { return s != SamplingStrategy::Random; });
  EmbeddingStore store;
  if (need_store) store = load_store(ctx.manifest.resolve(args.embeddings, "embeddings.store", "embed"));

  const auto& p = ctx.settings.pipeline;
  const std::size_t k = args.k ? args.k : p.k_selected;
  const SamplerOptions options{p.negative_weight_epsilon, p.diversity_reference};

  std::vector<std::string> outputs;
  json details = json::object();
  bool complete = true;
  for (auto strategy : strategies) {
    const auto result = sample_all(items, sets, store, strategy, k, p.rng_seed, options);
    const std::string rel = strategy_file(strategy);
    const std::string gaps = rel.substr(0, rel.size() - 6) + ".incomplete.txt";
    ctx.manifest.emit(rel, serialize_sampled(result.selections));
    outputs.push_back(rel);
    std::size_t fallbacks = 0;
    for (const auto& [id, sel] : result.selections) fallbacks += sel.uniform_fallback;
    if (result.complete()) {
      ctx.manifest.drop(gaps);
    } else {
      complete = false;
      std::string text;
      for (const auto& line : result.incomplete) text += line + "\n";
      ctx.manifest.emit(gaps, text);
      outputs.push_back(gaps);
      for (const auto& line : result.incomplete) std::cerr << "sample " << to_string(strategy) << " " << line << "\n";
    }
    details[std::string(to_string(strategy))] = {{"selected", result.selections.size()},
                                                 {"incomplete", result.incomplete.size()},
                                                 {"uniform_fallback", fallbacks}};
    std::cout << "sample " << to_string(strategy) << ": " << result.selections.size() << " items, k=" << k << "\n";
  }
  details["k"] = k;
  ctx.manifest.stage("sample", complete ? "complete" : "incomplete", outputs, details);
  return complete ? 0 : 1;
}

// augment ---------------------------------------------------------------

struct AugmentArgs {
  std::string dataset;
  std::vector<std::string> conditions;
};

json training_json(const TrainingMetadata& t) {
  return {{"epochs", t.epochs}, {"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
          {"optimizer", t.optimizer}};
}

int cmd_augment(Context& ctx, const AugmentArgs& args) {
  const auto items = load_dataset(ctx, args.dataset);
  const auto& p = ctx.settings.pipeline;
  const auto split = split_dataset(items, {p.train_fraction, p.rng_seed});

  std::vector<std::string> conditions = args.conditions;
  if (conditions.empty()) {
    conditions.emplace_back(kOriginalCondition);
    for (auto s : kAllStrategies)
      if (ctx.manifest.recorded(strategy_file(s))) conditions.emplace_back(to_string(s));
  }

  std::vector<std::string> outputs = {"split/train.jsonl", "split/test.jsonl"};
  ctx.manifest.emit(outputs[0], serialize_qa_dataset(split.train));
  ctx.manifest.emit(outputs[1], serialize_qa_dataset(split.test));

  json counts = json::object();
  for (const auto& condition : conditions) {
    std::vector<AugmentedRecord> records;
    if (condition == kOriginalCondition) {
      records = build_augmented(split.train, nullptr, condition);
    } else {
      const auto strategy = parse_strategy(condition);
      const auto sampled = load_sampled(ctx.manifest.require(strategy_file(strategy), "sample"));
      records = build_augmented(split.train, &sampled, condition);
    }
    for (auto& r : records) r.metadata["training"] = training_json(p.training);
    const auto rel = augmented_file(condition);
    ctx.manifest.emit(rel, serialize_augmented(records));
    outputs.push_back(rel);
    counts[condition] = records.size();
    std::cout << "augment " << condition << ": " << records.size() << " records\n";
  }
  ctx.manifest.stage("augment", "complete", outputs,
                     {{"train", split.train.size()}, {"test", split.test.size()}, {"records", counts}});
  return 0;
}

// respond ---------------------------------------------------------------

struct RespondArgs {
  std::string perturbations;
  std::vector<std::string> conditions;
  std::string model = "echo";
};

int cmd_respond(Context& ctx, const RespondArgs& args) {
  auto test = load_qa_dataset(ctx.manifest.require("split/test.jsonl", "augment"));
  const auto sets =
      load_perturbation_sets(ctx.manifest.resolve(args.perturbations, "perturbations.jsonl", "perturb"));
  std::vector<std::string> conditions = args.conditions;
  if (conditions.empty()) {
    conditions = {std::string(kNoTraining), std::string(kOriginalCondition)};
    for (auto s : kAllStrategies)
      if (ctx.manifest.recorded(augmented_file(std::string(to_string(s))))) conditions.emplace_back(to_string(s));
  }
  const auto responses =
      stub_echo_responses(test, sets, conditions, derive_seed(ctx.settings.pipeline.rng_seed, "respond", args.model),
                          args.model);
  ctx.manifest.emit("responses.jsonl", serialize_responses(responses));
  ctx.manifest.stage("respond", "complete", {"responses.jsonl"},
                     {{"model", args.model}, {"conditions", conditions}, {"responses", responses.size()}});
  std::cout << "respond: " << responses.size() << " responses from " << args.model << "\n";
  return 0;
}

// score -----------------------------------------------------------------

struct ScoreArgs {
  std::string dataset;
  std::string responses;
  std::string perturbations;
};

int cmd_score(Context& ctx, const ScoreArgs& args) {
  const auto items = load_dataset(ctx, args.dataset);
  const auto responses = load_responses(ctx.manifest.resolve(args.responses, "responses.jsonl", "respond"));
  std::optional<std::map<std::string, PerturbationSet>> sets;
  if (!args.perturbations.empty() || ctx.manifest.recorded("perturbations.jsonl"))
    sets = load_perturbation_sets(ctx.manifest.resolve(args.perturbations, "perturbations.jsonl", "perturb"));

  auto config = metrics_config(ctx.settings);
  std::unique_ptr<http::AuditLog> audit;
  std::optional<EmbeddingProvider> embedder;
  if (config.semantic_f1) {
    const auto spec = embedding_spec(ctx.settings, ctx.provider);
    const bool remote = spec.kind == EmbeddingProviderSpec::Kind::Remote;
    audit = open_audit(ctx, "score", remote);
    embedder.emplace(spec, remote ? http::make_post(ctx.settings.api_key) : http::Post{}, audit.get());
    config.token_embedder = [&](std::string_view token) { return embedder->embed_text(token); };
  }
  const auto scores = join_scores(responses, items, config, sets ? &*sets : nullptr);
  ctx.manifest.emit("scores.jsonl", serialize_scores(scores));
  ctx.manifest.stage("score", "complete", {"scores.jsonl"}, {{"records", scores.size()}}, audit_rel(audit, "score"));
  std::cout << "score: " << scores.size() << " score records\n";
  return 0;
}

// report ----------------------------------------------------------------

struct ReportArgs {
  std::string dataset;
  std::string scores;
};

int cmd_report(Context& ctx, const ReportArgs& args) {
  const auto items = load_dataset(ctx, args.dataset);
  const auto scores = load_scores(ctx.manifest.resolve(args.scores, "scores.jsonl", "score"));
  ReportInputs inputs;
  inputs.scores = scores;
  inputs.items = items;
  inputs.cv_mode = ctx.settings.pipeline.cv_mode;
  for (auto s : kAllStrategies)
    if (ctx.manifest.recorded(strategy_file(s)))
      inputs.sampled[s] = load_sampled(ctx.manifest.require(strategy_file(s), "sample"));
  const auto report = build_report(inputs);

  const std::vector<std::string> outputs = {"report/summary.csv", "report/cv.csv", "report/breakdown.csv",
                                            "report/report.md"};
  ctx.manifest.emit(outputs[0], report.summary_csv());
  ctx.manifest.emit(outputs[1], report.cv_csv());
  ctx.manifest.emit(outputs[2], report.breakdown_csv());
  ctx.manifest.emit(outputs[3], report.markdown());
  ctx.manifest.stage("report", "complete", outputs,
                     {{"summary_rows", report.summaries.size()}, {"cv_rows", report.cv.size()},
                      {"breakdown_rows", report.breakdown.size()}, {"cv_mode", to_string(inputs.cv_mode)}});
  std::cout << "report: " << report.summaries.size() << " summary rows written to "
            << (ctx.out() / "report").string() << "\n";
  return 0;
}

// analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::string dataset;
  std::string embeddings;
  std::string scores;
  std::string themes;
  bool raw = false;
};

int cmd_analyze(Context& ctx, const AnalyzeArgs& args) {
  const auto items = load_dataset(ctx, args.dataset);
  const auto store = load_store(ctx.manifest.resolve(args.embeddings, "embeddings.store", "embed"));
  const auto scores = load_scores(ctx.manifest.resolve(args.scores, "scores.jsonl", "score"));
  std::map<std::pair<std::string, int>, std::string> themes;
  if (!args.themes.empty()) {
    themes = load_themes(args.themes);
    ctx.manifest.input(args.themes);
  }

  const json& a = ctx.settings.analysis;
  const bool raw = args.raw || a.value("cluster_raw", false);
  const std::size_t pca_dim = a.value("pca_dim", 3);
  HdbscanOptions hopts;
  hopts.min_cluster_size = a.value("min_cluster_size", hopts.min_cluster_size);
  if (a.contains("min_samples") && !a["min_samples"].is_null()) hopts.min_samples = a["min_samples"].get<std::size_t>();
  hopts.zero_norm = ZeroNormPolicy::Noise;
  ClusterTableOptions topts;
  topts.metric = a.value("metric", topts.metric);
  topts.baseline_condition = a.value("baseline", topts.baseline_condition);
  topts.max_examples = a.value("max_examples", topts.max_examples);
  if (a.contains("excluded_conditions"))
    topts.excluded_conditions = a["excluded_conditions"].get<std::vector<std::string>>();

  std::map<std::string, std::string> prompts;
  std::map<std::string, ModalityKind> modality_of;
  for (const auto& item : items) {
    prompts[item.id] = item.prompt;
    modality_of[item.id] = item.modality;
  }

  std::vector<ClusterScoreRow> rows;
  std::string labels_csv = "modality,id,cluster\n";
  json details = json::object();
  for (auto modality : {ModalityKind::Audio, ModalityKind::Image, ModalityKind::Video}) {
    const std::string name(to_string(modality));
    std::vector<std::string> ids;
    std::vector<std::vector<double>> vecs;
    for (const auto& item : items) {
      if (item.modality != modality) continue;
      const auto* v = store.find({item.id, std::string(role::kModality)});
      if (!v) throw Error("no modality embedding for '" + item.id + "'; run `gpert embed` first");
      ids.push_back(item.id);
      vecs.emplace_back(v->values().begin(), v->values().end());
    }
    if (ids.empty()) continue;
    if (ids.size() < std::max<std::size_t>(hopts.min_cluster_size, 2)) {
      details[name] = {{"items", ids.size()}, {"skipped", "fewer items than min_cluster_size"}};
      continue;
    }

    Matrix points = Matrix::from_rows(vecs);
    json info = {{"items", ids.size()}, {"space", raw ? "raw" : "pca"}};
    if (!raw) {
      const std::size_t D = std::min({pca_dim, ids.size() - 1, points.cols()});
      ProjectionModel model;
      try {
        model = pca_fit(points, D);
      } catch (const Error& e) {
        throw Error(name + " embeddings: " + e.what());
      }
      points = pca_project(model, points);
      info["pca_dim"] = D;
      info["explained_variance"] = model.explained_variance;
      info["total_variance"] = model.total_variance;
    }
    const auto labeling = hdbscan_cluster(points, hopts);
    info["clusters"] = labeling.k;
    info["noise_fraction"] = labeling.noise_fraction();
    details[name] = info;
    for (std::size_t i = 0; i < ids.size(); ++i)
      labels_csv += name + "," + csv_field(ids[i]) + "," + std::to_string(labeling.labels[i]) + "\n";

    std::vector<ScoreRecord> subset;
    for (const auto& r : scores) {
      auto it = modality_of.find(r.item_id);
      if (it == modality_of.end()) throw Error("score for unknown item '" + r.item_id + "'");
      if (it->second == modality) subset.push_back(r);
    }
    std::map<int, std::string> modality_themes;
    for (const auto& [key, theme] : themes)
      if (key.first == name) modality_themes[key.second] = theme;
    auto table = cluster_score_table(name, ids, labeling, subset, topts, modality_themes);
    rows.insert(rows.end(), table.begin(), table.end());
  }

  const std::vector<std::string> outputs = {"analysis/labels.csv", "analysis/clusters.csv", "analysis/clusters.md"};
  ctx.manifest.emit(outputs[0], labels_csv);
  ctx.manifest.emit(outputs[1], cluster_csv(rows));
  ctx.manifest.emit(outputs[2], cluster_markdown(rows, prompts, topts.metric));
  ctx.manifest.stage("analyze", "complete", outputs, details);
  std::cout << "analyze: " << rows.size() << " cluster rows\n";
  return 0;
}

// stats -----------------------------------------------------------------

json distribution_json(const LengthDistribution& d) {
  return {{"min", d.min}, {"median", d.median}, {"mean", d.mean}, {"max", d.max}};
}

int cmd_stats(Context& ctx, const std::string& dataset) {
  const auto items = load_dataset(ctx, dataset);
  if (auto problems = validate_dataset(items); !problems.empty())
    throw ValidationError(problems);
  json out = {{"items", items.size()}, {"modalities", json::object()}};
  for (const auto& [m, st] : dataset_stats(items))
    out["modalities"][std::string(to_string(m))] = {{"count", st.count},
                                                    {"prompt_tokens", distribution_json(st.prompt_tokens)},
                                                    {"answer_tokens", distribution_json(st.answer_tokens)}};
  ctx.manifest.emit("stats.json", out.dump(2) + "\n");
  ctx.manifest.stage("stats", "complete", {"stats.json"});
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

std::vector<ResponseRecord> stub_echo_responses(std::span<const QAItem> items,
                                                const std::map<std::string, PerturbationSet>& sets,
                                                std::span<const std::string> conditions, std::uint64_t seed,
                                                const std::string& model) {
  std::vector<const QAItem*> sorted;
  for (const auto& item : items) sorted.push_back(&item);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

  std::vector<ResponseRecord> out;
  for (const auto* item : sorted) {
    const auto it = sets.find(item->id);
    const std::size_t n = it == sets.end() ? 0 : it->second.candidates.size();
    for (const auto& condition : conditions) {
      const auto [p_original, p_perturbed] = echo_accuracy(condition);
      for (int v = -1; v < static_cast<int>(n); ++v) {
        const std::string& prompt = v < 0 ? item->prompt : it->second.candidates[v];
        Rng rng(hash_parts(seed, {condition, item->id, std::to_string(v)}));
        const bool correct = rng.uniform() < (v < 0 ? p_original : p_perturbed);
        out.push_back({item->id, condition, v, correct ? item->answer : prompt, model});
      }
    }
  }
  return out;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Grounded prompt-perturbation sampling and robustness reports for multimodal QA data", "gpert"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();

  CommonFlags flags;
  app.add_option("--config", flags.config, "JSON config file");
  flags.seed_opt = app.add_option("--seed", flags.seed, "root random seed");
  flags.parallelism_opt = app.add_option("--parallelism", flags.parallelism, "worker threads per stage");
  flags.out_dir_opt = app.add_option("--out-dir", flags.out_dir, "artifact directory");
  app.add_option("--provider", flags.provider,
                 "provider kind for this stage (perturb: stub|llm-paraphrase|paraphraser|back-translation; "
                 "embed/score: stub|remote)");

  std::function<int(Context&)> action;

  PerturbArgs perturb;
  auto* perturb_cmd = app.add_subcommand("perturb", "generate N perturbations per prompt");
  perturb_cmd->add_option("--dataset", perturb.dataset, "QA dataset (JSONL)")->required();
  perturb_cmd->add_option("--n", perturb.n, "perturbations per prompt")->check(CLI::PositiveNumber);
  perturb_cmd->callback([&] { action = [&](Context& c) { return cmd_perturb(c, perturb); }; });

  EmbedArgs embed;
  auto* embed_cmd = app.add_subcommand("embed", "embed prompts, perturbations and modality assets");
  embed_cmd->add_option("--dataset", embed.dataset, "QA dataset (JSONL)")->required();
  embed_cmd->add_option("--perturbations", embed.perturbations, "perturbation file");
  embed_cmd->callback([&] { action = [&](Context& c) { return cmd_embed(c, embed); }; });

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "select k perturbations per prompt");
  sample_cmd->add_option("--dataset", sample.dataset, "QA dataset (JSONL)")->required();
  sample_cmd->add_option("--perturbations", sample.perturbations, "perturbation file");
  sample_cmd->add_option("--embeddings", sample.embeddings, "embedding store");
  sample_cmd->add_option("--strategy", sample.strategies, "text-sim|modality-sim|random|joint-diverse (repeatable)");
  sample_cmd->add_option("--k", sample.k, "selections per prompt")->check(CLI::PositiveNumber);
  sample_cmd->callback([&] { action = [&](Context& c) { return cmd_sample(c, sample); }; });

  AugmentArgs augment;
  auto* augment_cmd = app.add_subcommand("augment", "split the dataset and emit per-condition training files");
  augment_cmd->add_option("--dataset", augment.dataset, "QA dataset (JSONL)")->required();
  augment_cmd->add_option("--condition", augment.conditions, "original or a strategy name (repeatable)");
  augment_cmd->callback([&] { action = [&](Context& c) { return cmd_augment(c, augment); }; });

  RespondArgs respond;
  auto* respond_cmd = app.add_subcommand("respond", "answer the test split with the stub echo model");
  respond_cmd->add_option("--perturbations", respond.perturbations, "perturbation file");
  respond_cmd->add_option("--condition", respond.conditions, "training condition (repeatable)");
  respond_cmd->add_option("--model", respond.model, "model name recorded in responses");
  respond_cmd->callback([&] { action = [&](Context& c) { return cmd_respond(c, respond); }; });

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "score responses against gold answers");
  score_cmd->add_option("--dataset", score.dataset, "QA dataset (JSONL)")->required();
  score_cmd->add_option("--responses", score.responses, "response file (JSONL)");
  score_cmd->add_option("--perturbations", score.perturbations, "perturbation file");
  score_cmd->callback([&] { action = [&](Context& c) { return cmd_score(c, score); }; });

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "score tables, CV table and per-strategy breakdowns");
  report_cmd->add_option("--dataset", report.dataset, "QA dataset (JSONL)")->required();
  report_cmd->add_option("--scores", report.scores, "score file (JSONL)");
  report_cmd->callback([&] { action = [&](Context& c) { return cmd_report(c, report); }; });

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "cluster modality embeddings and tabulate scores per cluster");
  analyze_cmd->add_option("--dataset", analyze.dataset, "QA dataset (JSONL)")->required();
  analyze_cmd->add_option("--embeddings", analyze.embeddings, "embedding store");
  analyze_cmd->add_option("--scores", analyze.scores, "score file (JSONL)");
  analyze_cmd->add_option("--themes", analyze.themes, "CSV with modality,cluster,theme");
  analyze_cmd->add_flag("--raw", analyze.raw, "cluster raw embeddings instead of PCA projections");
  analyze_cmd->callback([&] { action = [&](Context& c) { return cmd_analyze(c, analyze); }; });

  std::string stats_dataset;
  auto* stats_cmd = app.add_subcommand("stats", "dataset statistics per modality");
  stats_cmd->add_option("--dataset", stats_dataset, "QA dataset (JSONL)")->required();
  stats_cmd->callback([&] { action = [&](Context& c) { return cmd_stats(c, stats_dataset); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  std::optional<Context> ctx;
  try {
    Settings settings = resolve_settings(flags);
    fs::create_directories(settings.out_dir);
    Manifest manifest(settings.out_dir);
    manifest.begin(settings);
    ctx.emplace(Context{std::move(settings), flags.provider, std::move(manifest)});
    const int rc = action(*ctx);
    ctx->manifest.save();
    return rc;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (ctx) {
      try {
        ctx->manifest.stage(stage, "failed", {}, {{"error", e.what()}});
        ctx->manifest.save();
      } catch (const std::exception&) {
      }
    }
    return 1;
  }
}

}  // namespace gpert

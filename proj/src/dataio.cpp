#include "gpert/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "gpert/error.hpp"
#include "gpert/hashing.hpp"
#include "gpert/validate.hpp"

namespace gpert {

void for_each_jsonl(std::string_view contents, const std::function<void(const nlohmann::json&, long)>& fn) {
  long lineno = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    std::string_view line = contents.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError("malformed JSON object", lineno);
    try {
      fn(j, lineno);
    } catch (const nlohmann::json::out_of_range& e) {
      std::string what = e.what();
      const auto key = what.find("key '");
      const auto end = key == std::string::npos ? key : what.find('\'', key + 5);
      throw ParseError(end != std::string::npos ? "missing field " + what.substr(key + 4, end - key - 3) : what,
                       lineno);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad field: ") + e.what(), lineno);
    } catch (const ParseError& e) {
      if (e.line() > 0) throw;
      throw ParseError(e.what(), lineno);
    } catch (const ValidationError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), lineno);
    }
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void read_jsonl(const std::filesystem::path& path, const std::function<void(const nlohmann::json&, long)>& fn) {
  const std::string contents = read_file(path);
  try {
    for_each_jsonl(contents, fn);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

template <typename T>
std::string dump_lines(const T& range) {
  std::string out;
  for (const auto& r : range) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  return out;
}

}  // namespace

std::vector<QAItem> parse_qa_dataset(std::string_view contents) {
  std::vector<QAItem> items;
  for_each_jsonl(contents, [&](const nlohmann::json& j, long) {
    QAItem item;
    item.id = j.at("id").get<std::string>();
    item.modality = parse_modality(j.at("modality").get<std::string>());
    item.data_ref = j.at("data_ref").get<std::string>();
    item.prompt = j.at("prompt").get<std::string>();
    item.answer = j.at("answer").get<std::string>();
    for (const auto& [k, v] : j.items())
      if (k != "id" && k != "modality" && k != "data_ref" && k != "prompt" && k != "answer") item.extra[k] = v;
    items.push_back(std::move(item));
  });
  if (auto problems = validate_dataset(items); !problems.empty()) throw ValidationError(std::move(problems));
  return items;
}

std::vector<QAItem> load_qa_dataset(const std::filesystem::path& path) {
  const std::string contents = read_file(path);
  try {
    return parse_qa_dataset(contents);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string serialize_qa_dataset(std::span<const QAItem> items) { return dump_lines(items); }

Split split_dataset(std::span<const QAItem> items, const SplitSpec& spec) {
  if (items.size() < 2) throw Error("split_dataset needs at least 2 items");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) throw Error("train_fraction must be in (0, 1)");
  std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
  ranked.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) ranked.emplace_back(derive_seed(spec.seed, "split", items[i].id), i);
  std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return items[a.second].id < items[b.second].id;
  });
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(items.size())));
  Split split;
  for (std::size_t r = 0; r < ranked.size(); ++r)
    (r < n_train ? split.train : split.test).push_back(items[ranked[r].second]);
  auto by_id = [](const QAItem& a, const QAItem& b) { return a.id < b.id; };
  std::sort(split.train.begin(), split.train.end(), by_id);
  std::sort(split.test.begin(), split.test.end(), by_id);
  return split;
}

std::string serialize_perturbation_sets(const std::map<std::string, PerturbationSet>& sets) {
  std::string out;
  for (const auto& [id, set] : sets) {
    for (std::size_t i = 0; i < set.candidates.size(); ++i) {
      out += nlohmann::json{{"prompt_id", id},
                            {"method", std::string(to_string(set.method))},
                            {"index", i},
                            {"text", set.candidates[i]},
                            {"padded", set.padded}}
                 .dump();
      out += '\n';
    }
  }
  return out;
}

std::map<std::string, PerturbationSet> parse_perturbation_sets(std::string_view contents) {
  std::map<std::string, std::map<std::size_t, std::string>> texts;
  std::map<std::string, PerturbationSet> sets;
  for_each_jsonl(contents, [&](const nlohmann::json& j, long) {
    const auto id = j.at("prompt_id").get<std::string>();
    auto& set = sets[id];
    set.prompt_id = id;
    set.method = parse_perturb_method(j.at("method").get<std::string>());
    set.padded = j.value("padded", false);
    const auto index = j.at("index").get<std::size_t>();
    if (!texts[id].emplace(index, j.at("text").get<std::string>()).second)
      throw ParseError("duplicate candidate index " + std::to_string(index) + " for '" + id + "'");
  });
  for (auto& [id, set] : sets) {
    std::size_t expect = 0;
    for (auto& [index, t] : texts[id]) {
      if (index != expect++) throw ParseError("candidate indices for '" + id + "' are not contiguous");
      set.candidates.push_back(std::move(t));
    }
  }
  return sets;
}

std::map<std::string, PerturbationSet> load_perturbation_sets(const std::filesystem::path& path) {
  return parse_perturbation_sets(read_file(path));
}

std::string serialize_sampled(const std::map<std::string, SampledPrompts>& sampled) {
  std::string out;
  for (const auto& [id, s] : sampled) {
    out += nlohmann::json(s).dump();
    out += '\n';
  }
  return out;
}

std::map<std::string, SampledPrompts> parse_sampled(std::string_view contents) {
  std::map<std::string, SampledPrompts> out;
  for_each_jsonl(contents, [&](const nlohmann::json& j, long) {
    auto s = j.get<SampledPrompts>();
    if (s.selected.size() != s.indices.size()) throw ParseError("selected/indices length mismatch");
    auto id = s.prompt_id;
    if (!out.emplace(std::move(id), std::move(s)).second) throw ParseError("duplicate prompt_id");
  });
  return out;
}

std::map<std::string, SampledPrompts> load_sampled(const std::filesystem::path& path) {
  return parse_sampled(read_file(path));
}

void to_json(nlohmann::json& j, const AugmentedRecord& r) {
  j = nlohmann::json{{"prompt_id", r.prompt_id},
                     {"modality", std::string(to_string(r.modality))},
                     {"data_ref", r.data_ref},
                     {"prompt", r.prompt},
                     {"answer", r.answer},
                     {"strategy", r.strategy},
                     {"variant_index", r.variant_index}};
  if (!r.metadata.empty()) j["metadata"] = r.metadata;
}

void from_json(const nlohmann::json& j, AugmentedRecord& r) {
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.modality = parse_modality(j.at("modality").get<std::string>());
  r.data_ref = j.at("data_ref").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  r.strategy = j.at("strategy").get<std::string>();
  r.variant_index = j.at("variant_index").get<std::size_t>();
  r.metadata = j.value("metadata", nlohmann::json::object());
}

std::vector<AugmentedRecord> build_augmented(std::span<const QAItem> train_items,
                                             const std::map<std::string, SampledPrompts>* sampled,
                                             std::string_view condition) {
  std::vector<AugmentedRecord> out;
  const bool original = condition == kOriginalCondition;
  if (!original && !sampled) throw Error("perturbation condition '" + std::string(condition) + "' needs sampled prompts");
  std::vector<std::string> gaps;
  for (const auto& item : train_items) {
    AugmentedRecord base;
    base.prompt_id = item.id;
    base.modality = item.modality;
    base.data_ref = item.data_ref;
    base.answer = item.answer;
    base.strategy = std::string(condition);
    base.metadata = item.extra;
    if (original) {
      base.prompt = item.prompt;
      out.push_back(std::move(base));
      continue;
    }
    auto it = sampled->find(item.id);
    if (it == sampled->end() || it->second.selected.empty()) {
      gaps.push_back(item.id);
      continue;
    }
    for (std::size_t v = 0; v < it->second.selected.size(); ++v) {
      AugmentedRecord r = base;
      r.prompt = it->second.selected[v];
      r.variant_index = v;
      out.push_back(std::move(r));
    }
  }
  if (!gaps.empty()) {
    std::sort(gaps.begin(), gaps.end());
    std::vector<std::string> problems;
    for (auto& g : gaps) problems.push_back("no sampled prompts for '" + g + "'");
    throw ValidationError(std::move(problems));
  }
  std::sort(out.begin(), out.end(), [](const AugmentedRecord& a, const AugmentedRecord& b) {
    if (a.prompt_id != b.prompt_id) return a.prompt_id < b.prompt_id;
    return a.variant_index < b.variant_index;
  });
  return out;
}

std::string serialize_augmented(std::span<const AugmentedRecord> records) { return dump_lines(records); }

std::vector<AugmentedRecord> parse_augmented(std::string_view contents) {
  std::vector<AugmentedRecord> out;
  for_each_jsonl(contents, [&](const nlohmann::json& j, long) { out.push_back(j.get<AugmentedRecord>()); });
  return out;
}

void to_json(nlohmann::json& j, const ResponseRecord& r) {
  j = nlohmann::json{{"prompt_id", r.prompt_id},
                     {"condition", r.condition},
                     {"variant_index", r.variant_index},
                     {"response", r.response},
                     {"model", r.model}};
}

void from_json(const nlohmann::json& j, ResponseRecord& r) {
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.condition = j.at("condition").get<std::string>();
  r.variant_index = j.value("variant_index", -1);
  r.response = j.at("response").get<std::string>();
  r.model = j.value("model", std::string());
}

std::vector<ResponseRecord> parse_responses(std::string_view contents) {
  std::vector<ResponseRecord> out;
  for_each_jsonl(contents, [&](const nlohmann::json& j, long) { out.push_back(j.get<ResponseRecord>()); });
  return out;
}

std::vector<ResponseRecord> load_responses(const std::filesystem::path& path) {
  return parse_responses(read_file(path));
}

std::string serialize_responses(std::span<const ResponseRecord> responses) { return dump_lines(responses); }

std::vector<ScoreRecord> join_scores(std::span<const ResponseRecord> responses, std::span<const QAItem> items,
                                     const MetricsConfig& config,
                                     const std::map<std::string, PerturbationSet>* sets) {
  if (config.semantic_f1 && !config.token_embedder)
    throw Error("semantic_f1 requested without a token embedder");
  std::unordered_map<std::string, const QAItem*> by_id;
  for (const auto& item : items) by_id.emplace(item.id, &item);

  std::vector<std::string> problems;
  std::set<std::tuple<std::string, std::string, std::string, int>> keys;
  for (const auto& r : responses) {
    const auto it = by_id.find(r.prompt_id);
    if (it == by_id.end()) {
      problems.push_back("dangling reference: unknown item '" + r.prompt_id + "'");
      continue;
    }
    if (r.variant_index < -1) {
      problems.push_back("invalid variant_index " + std::to_string(r.variant_index) + " for '" + r.prompt_id + "'");
    } else if (sets && r.variant_index >= 0) {
      const auto s = sets->find(r.prompt_id);
      if (s == sets->end() || static_cast<std::size_t>(r.variant_index) >= s->second.candidates.size())
        problems.push_back("dangling reference: '" + r.prompt_id + "' has no perturbation " +
                           std::to_string(r.variant_index));
    }
    if (!keys.emplace(r.model, r.prompt_id, r.condition, r.variant_index).second)
      problems.push_back("duplicate response for ('" + r.prompt_id + "', '" + r.condition + "', " +
                         std::to_string(r.variant_index) + ")");
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));

  std::vector<ScoreRecord> out;
  for (const auto& r : responses) {
    const QAItem& item = *by_id.at(r.prompt_id);
    auto add = [&](std::string_view metric, double value) {
      out.push_back({r.prompt_id, r.condition, r.variant_index, std::string(metric), value, r.model});
    };
    if (config.bleu) add(metric::kBleu, bleu(r.response, item.answer, config.bleu_options));
    if (config.rouge_l) add(metric::kRougeL, rouge_l(r.response, item.answer));
    if (config.semantic_f1) add(metric::kSemanticF1, semantic_f1(r.response, item.answer, config.token_embedder));
  }
  std::sort(out.begin(), out.end(), [](const ScoreRecord& a, const ScoreRecord& b) {
    return std::tie(a.model, a.condition, a.item_id, a.variant_index, a.metric) <
           std::tie(b.model, b.condition, b.item_id, b.variant_index, b.metric);
  });
  return out;
}

std::string serialize_scores(std::span<const ScoreRecord> records) { return dump_lines(records); }

std::vector<ScoreRecord> parse_scores(std::string_view contents) {
  std::vector<ScoreRecord> out;
  std::set<std::tuple<std::string, std::string, std::string, int, std::string>> keys;
  for_each_jsonl(contents, [&](const nlohmann::json& j, long) {
    auto r = j.get<ScoreRecord>();
    if (!keys.emplace(r.model, r.item_id, r.condition, r.variant_index, r.metric).second)
      throw ParseError("duplicate score record for '" + r.item_id + "'");
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<ScoreRecord> load_scores(const std::filesystem::path& path) { return parse_scores(read_file(path)); }

std::vector<std::vector<std::string>> parse_csv(std::string_view contents) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < contents.size(); ++i) {
    const char c = contents[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < contents.size() && contents[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < contents.size() && contents[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::map<std::pair<std::string, int>, std::string> load_themes(const std::filesystem::path& path) {
  const auto rows = parse_csv(read_file(path));
  std::map<std::pair<std::string, int>, std::string> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i == 0 && !r.empty() && r[0] == "modality") continue;
    if (r.size() < 3) throw ParseError("theme row needs modality,cluster,theme", static_cast<long>(i + 1));
    try {
      out[{r[0], std::stoi(r[1])}] = r[2];
    } catch (const std::exception&) {
      throw ParseError("bad cluster id '" + r[1] + "'", static_cast<long>(i + 1));
    }
  }
  return out;
}

}  // namespace gpert

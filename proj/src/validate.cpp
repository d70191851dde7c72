#include "gpert/validate.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "gpert/error.hpp"
#include "gpert/text.hpp"

namespace gpert {

std::vector<std::string> validate_item(const QAItem& item) {
  std::vector<std::string> problems;
  if (text::is_blank(item.id)) problems.emplace_back("empty id");
  if (text::is_blank(item.data_ref)) problems.emplace_back("empty data_ref");
  if (text::is_blank(item.prompt)) problems.emplace_back("empty prompt");
  if (text::is_blank(item.answer)) problems.emplace_back("empty answer");
  return problems;
}

std::vector<std::string> validate_dataset(std::span<const QAItem> items) {
  std::vector<std::string> problems;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (auto& p : validate_item(items[i])) problems.push_back("item '" + items[i].id + "': " + p);
    auto [it, inserted] = seen.emplace(items[i].id, i);
    if (!inserted) problems.push_back("duplicate id '" + items[i].id + "'");
  }
  return problems;
}

LengthDistribution length_distribution(std::span<const std::size_t> lengths) {
  if (lengths.empty()) throw Error("length distribution of an empty list");
  std::vector<std::size_t> v(lengths.begin(), lengths.end());
  std::sort(v.begin(), v.end());
  LengthDistribution d;
  d.min = v.front();
  d.max = v.back();
  const std::size_t n = v.size();
  d.median = n % 2 == 1 ? static_cast<double>(v[n / 2])
                        : 0.5 * static_cast<double>(v[n / 2 - 1] + v[n / 2]);
  d.mean = static_cast<double>(std::accumulate(v.begin(), v.end(), std::size_t{0})) /
           static_cast<double>(n);
  return d;
}

std::map<ModalityKind, ModalityStats> dataset_stats(std::span<const QAItem> items) {
  if (items.empty()) throw Error("dataset_stats: empty dataset");
  std::map<ModalityKind, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> lengths;
  for (const auto& item : items) {
    auto& [p, a] = lengths[item.modality];
    p.push_back(text::tokens(item.prompt).size());
    a.push_back(text::tokens(item.answer).size());
  }
  std::map<ModalityKind, ModalityStats> out;
  for (const auto& [m, pa] : lengths) {
    ModalityStats s;
    s.count = pa.first.size();
    s.prompt_tokens = length_distribution(pa.first);
    s.answer_tokens = length_distribution(pa.second);
    out.emplace(m, s);
  }
  return out;
}

}  // namespace gpert

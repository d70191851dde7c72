#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "gpert/types.hpp"

namespace gpert {

// Every violated invariant of a single item; empty when valid.
std::vector<std::string> validate_item(const QAItem& item);

// Item-level problems (prefixed with the item id) plus cross-item ones such as
// duplicate ids.
std::vector<std::string> validate_dataset(std::span<const QAItem> items);

struct LengthDistribution {
  std::size_t min = 0;
  double median = 0.0;
  double mean = 0.0;
  std::size_t max = 0;
};

LengthDistribution length_distribution(std::span<const std::size_t> lengths);

struct ModalityStats {
  std::size_t count = 0;
  LengthDistribution prompt_tokens;
  LengthDistribution answer_tokens;
};

// Lengths are counted in whitespace-delimited tokens. Throws gpert::Error on an
// empty dataset.
std::map<ModalityKind, ModalityStats> dataset_stats(std::span<const QAItem> items);

}  // namespace gpert

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

#include "gpert/analysis.hpp"
#include "gpert/error.hpp"

namespace gpert {

std::vector<ClusterScoreRow> cluster_score_table(const std::string& modality, std::span<const std::string> item_ids,
                                                 const ClusterLabeling& labeling,
                                                 std::span<const ScoreRecord> records,
                                                 const ClusterTableOptions& options,
                                                 const std::map<int, std::string>& themes) {
  if (item_ids.size() != labeling.labels.size())
    throw Error("cluster_score_table: " + std::to_string(item_ids.size()) + " ids for " +
                std::to_string(labeling.labels.size()) + " labels");
  std::unordered_map<std::string, int> label_of;
  for (std::size_t i = 0; i < item_ids.size(); ++i) label_of.emplace(item_ids[i], labeling.labels[i]);

  // cluster -> condition -> (sum, count)
  std::map<int, std::map<std::string, std::pair<double, std::size_t>>> sums;
  std::set<std::string> unlabeled;
  for (const auto& r : records) {
    if (r.metric != options.metric) continue;
    if (options.perturbed_only && r.variant_index < 0) continue;
    auto it = label_of.find(r.item_id);
    if (it == label_of.end()) {
      unlabeled.insert(r.item_id);
      continue;
    }
    auto& [sum, count] = sums[it->second][r.condition];
    sum += r.value;
    ++count;
  }
  if (!unlabeled.empty()) {
    std::string msg = "cluster_score_table: scored items without a cluster label:";
    for (const auto& id : unlabeled) msg += " " + id;
    throw Error(msg);
  }

  auto excluded = [&](const std::string& c) {
    return std::find(options.excluded_conditions.begin(), options.excluded_conditions.end(), c) !=
           options.excluded_conditions.end();
  };

  auto build_row = [&](int cluster) {
    ClusterScoreRow row;
    row.modality = modality;
    row.cluster_id = cluster;
    if (auto t = themes.find(cluster); t != themes.end()) row.theme = t->second;
    for (std::size_t i = 0; i < item_ids.size(); ++i) {
      if (labeling.labels[i] != cluster) continue;
      ++row.size;
      if (row.example_ids.size() < options.max_examples) row.example_ids.push_back(item_ids[i]);
    }
    double pert_sum = 0.0;
    std::size_t pert_n = 0;
    if (auto it = sums.find(cluster); it != sums.end()) {
      for (const auto& [cond, sc] : it->second) {
        const double mean = sc.first / static_cast<double>(sc.second);
        row.condition_means[cond] = mean;
        if (cond == options.baseline_condition) {
          row.baseline_mean = mean;
        } else if (!excluded(cond)) {
          pert_sum += mean;
          ++pert_n;
        }
      }
    }
    if (pert_n > 0) row.perturbation_mean = pert_sum / static_cast<double>(pert_n);
    if (cluster >= 0) {
      if (row.perturbation_mean && row.baseline_mean && *row.baseline_mean > 0.0)
        row.ratio = *row.perturbation_mean / *row.baseline_mean;
      else
        row.flagged = true;
    }
    return row;
  };

  std::vector<ClusterScoreRow> rows;
  for (int c = 0; c < labeling.k; ++c) rows.push_back(build_row(c));
  std::stable_sort(rows.begin(), rows.end(), [](const ClusterScoreRow& a, const ClusterScoreRow& b) {
    if (a.ratio.has_value() != b.ratio.has_value()) return a.ratio.has_value();
    return a.ratio && *a.ratio > *b.ratio;
  });
  if (labeling.noise_count() > 0) rows.push_back(build_row(-1));
  return rows;
}

}  // namespace gpert

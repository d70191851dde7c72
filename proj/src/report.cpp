#include "gpert/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <tuple>
#include <unordered_map>

#include "gpert/dataio.hpp"
#include "gpert/error.hpp"

namespace gpert {

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int condition_rank(const std::string& c) {
  static const std::vector<std::string> order = {"no-training", "original",     "joint-diverse",
                                                 "modality-sim", "text-sim",   "random"};
  auto it = std::find(order.begin(), order.end(), c);
  return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

int metric_rank(const std::string& m) {
  if (m == metric::kBleu) return 0;
  if (m == metric::kRougeL) return 1;
  if (m == metric::kSemanticF1) return 2;
  return 3;
}

struct GroupKey {
  std::string model;
  std::string modality;
  std::string condition;
  std::string metric;
  EvalSet eval_set;

  auto tie() const {
    return std::make_tuple(model, eval_set, modality, condition_rank(condition), condition, metric_rank(metric), metric);
  }
  bool operator<(const GroupKey& o) const { return tie() < o.tie(); }
};

using Groups = std::map<GroupKey, std::vector<double>>;

std::vector<SummaryRow> summarize_groups(const Groups& groups) {
  std::vector<SummaryRow> out;
  for (const auto& [k, values] : groups)
    out.push_back({k.model, k.modality, k.condition, k.metric, k.eval_set, summarize(values)});
  return out;
}

std::string md_escape(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

// Rows: (modality, condition); columns: metrics. One table per (model, eval set).
void append_score_tables(std::string& md, std::span<const SummaryRow> rows, const std::string& heading_prefix) {
  std::map<std::pair<std::string, EvalSet>, std::vector<const SummaryRow*>> tables;
  for (const auto& r : rows) tables[{r.model, r.eval_set}].push_back(&r);
  for (const auto& [key, trs] : tables) {
    std::vector<std::string> metrics;
    for (const auto* r : trs)
      if (std::find(metrics.begin(), metrics.end(), r->metric) == metrics.end()) metrics.push_back(r->metric);
    std::sort(metrics.begin(), metrics.end(),
              [](const std::string& a, const std::string& b) { return std::make_pair(metric_rank(a), a) < std::make_pair(metric_rank(b), b); });
    md += "### " + heading_prefix + (key.first.empty() ? "" : "model `" + key.first + "`, ") + "scores on " +
          (key.second == EvalSet::Original ? "original prompts" : "prompt perturbations") +
          " (standard error in parentheses)\n\n| Modality | Condition |";
    for (const auto& m : metrics) md += " " + m + " |";
    md += "\n|---|---|";
    for (std::size_t i = 0; i < metrics.size(); ++i) md += "---|";
    md += "\n";
    std::vector<std::pair<std::string, std::string>> row_keys;
    for (const auto* r : trs)
      if (std::find(row_keys.begin(), row_keys.end(), std::make_pair(r->modality, r->condition)) == row_keys.end())
        row_keys.emplace_back(r->modality, r->condition);
    for (const auto& [modality, condition] : row_keys) {
      md += "| " + modality + " | " + condition + " |";
      for (const auto& m : metrics) {
        auto it = std::find_if(trs.begin(), trs.end(), [&](const SummaryRow* r) {
          return r->modality == modality && r->condition == condition && r->metric == m;
        });
        md += " " + (it == trs.end() ? std::string("-") : format_cell((*it)->summary.mean, (*it)->summary.std_err)) + " |";
      }
      md += "\n";
    }
    md += "\n";
  }
}

}  // namespace

std::string format_cell(double mean, double std_err) { return fixed4(mean) + " (" + fixed4(std_err) + ")"; }

std::string_view to_string(EvalSet e) { return e == EvalSet::Original ? "original" : "perturbed"; }

Report build_report(const ReportInputs& inputs) {
  std::unordered_map<std::string, std::string> modality_of;
  for (const auto& item : inputs.items) modality_of.emplace(item.id, std::string(to_string(item.modality)));

  Groups groups;
  std::map<SamplingStrategy, Groups> by_strategy;
  for (const auto& r : inputs.scores) {
    auto m = modality_of.find(r.item_id);
    if (m == modality_of.end()) throw Error("score references unknown item '" + r.item_id + "'");
    const EvalSet es = r.variant_index < 0 ? EvalSet::Original : EvalSet::Perturbed;
    GroupKey key{r.model, m->second, r.condition, r.metric, es};
    groups[key].push_back(r.value);
    if (es != EvalSet::Perturbed) continue;
    for (const auto& [strategy, sampled] : inputs.sampled) {
      auto s = sampled.find(r.item_id);
      if (s == sampled.end()) continue;
      const auto& idx = s->second.indices;
      if (std::find(idx.begin(), idx.end(), static_cast<std::size_t>(r.variant_index)) != idx.end())
        by_strategy[strategy][key].push_back(r.value);
    }
  }

  Report report;
  report.summaries = summarize_groups(groups);
  for (const auto& [k, values] : groups) {
    if (k.eval_set != EvalSet::Perturbed) continue;
    CvRow row{k.model, k.modality, k.condition, k.metric, values.size(), summarize(values).mean, std::nullopt,
              inputs.cv_mode, ""};
    if (values.size() < 2) {
      row.flag = "n<2";
    } else if (row.mean <= 0.0) {
      row.flag = "mean<=0";
      if (row.mean < 0.0) row.cv = coefficient_of_variation(values, inputs.cv_mode);
    } else {
      row.cv = coefficient_of_variation(values, inputs.cv_mode);
    }
    report.cv.push_back(std::move(row));
  }
  for (const auto& [strategy, g] : by_strategy)
    for (auto& row : summarize_groups(g)) report.breakdown.push_back({strategy, std::move(row)});
  return report;
}

std::string Report::summary_csv() const {
  std::string out = "model,modality,condition,metric,eval_set,n,mean,std_err,cell\n";
  for (const auto& r : summaries) {
    out += csv_field(r.model) + "," + r.modality + "," + csv_field(r.condition) + "," + csv_field(r.metric) + "," +
           std::string(to_string(r.eval_set)) + "," + std::to_string(r.summary.n) + "," + full(r.summary.mean) + "," +
           full(r.summary.std_err) + "," + format_cell(r.summary.mean, r.summary.std_err) + "\n";
  }
  return out;
}

std::string Report::cv_csv() const {
  std::string out = "model,modality,condition,metric,n,mean,cv,mode,flag\n";
  for (const auto& r : cv) {
    out += csv_field(r.model) + "," + r.modality + "," + csv_field(r.condition) + "," + csv_field(r.metric) + "," +
           std::to_string(r.n) + "," + full(r.mean) + "," + (r.cv ? full(*r.cv) : std::string()) + "," +
           std::string(to_string(r.mode)) + "," + r.flag + "\n";
  }
  return out;
}

std::string Report::breakdown_csv() const {
  std::string out = "strategy,model,modality,condition,metric,n,mean,std_err,cell\n";
  for (const auto& b : breakdown) {
    const auto& r = b.row;
    out += std::string(to_string(b.strategy)) + "," + csv_field(r.model) + "," + r.modality + "," +
           csv_field(r.condition) + "," + csv_field(r.metric) + "," + std::to_string(r.summary.n) + "," +
           full(r.summary.mean) + "," + full(r.summary.std_err) + "," +
           format_cell(r.summary.mean, r.summary.std_err) + "\n";
  }
  return out;
}

std::string Report::markdown() const {
  std::string md = "# Robustness report\n\n## Scores\n\n";
  append_score_tables(md, summaries, "");

  md += "## Coefficient of variation on prompt perturbations (lower is better)\n\n";
  std::map<std::string, std::vector<const CvRow*>> by_model;
  for (const auto& r : cv) by_model[r.model].push_back(&r);
  for (const auto& [model, rows] : by_model) {
    std::vector<std::string> metrics;
    for (const auto* r : rows)
      if (std::find(metrics.begin(), metrics.end(), r->metric) == metrics.end()) metrics.push_back(r->metric);
    std::sort(metrics.begin(), metrics.end(),
              [](const std::string& a, const std::string& b) { return std::make_pair(metric_rank(a), a) < std::make_pair(metric_rank(b), b); });
    if (!model.empty()) md += "### model `" + model + "`\n\n";
    md += "| Modality | Condition |";
    for (const auto& m : metrics) md += " " + m + " |";
    md += "\n|---|---|";
    for (std::size_t i = 0; i < metrics.size(); ++i) md += "---|";
    md += "\n";
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto* r : rows)
      if (std::find(keys.begin(), keys.end(), std::make_pair(r->modality, r->condition)) == keys.end())
        keys.emplace_back(r->modality, r->condition);
    for (const auto& [modality, condition] : keys) {
      md += "| " + modality + " | " + condition + " |";
      for (const auto& m : metrics) {
        auto it = std::find_if(rows.begin(), rows.end(), [&](const CvRow* r) {
          return r->modality == modality && r->condition == condition && r->metric == m;
        });
        std::string cell = "-";
        if (it != rows.end()) {
          cell = (*it)->cv ? fixed4(*(*it)->cv) : std::string("n/a");
          if (!(*it)->flag.empty()) cell += " (" + (*it)->flag + ")";
        }
        md += " " + cell + " |";
      }
      md += "\n";
    }
    md += "\n";
  }
  if (!cv.empty()) md += "CV mode: " + std::string(to_string(cv.front().mode)) + "\n\n";

  if (!breakdown.empty()) {
    md += "## Results by prompt perturbation type\n\n";
    std::map<SamplingStrategy, std::vector<SummaryRow>> per;
    for (const auto& b : breakdown) per[b.strategy].push_back(b.row);
    for (const auto& [strategy, rows] : per)
      append_score_tables(md, rows, std::string(to_string(strategy)) + " perturbations, ");
  }
  return md;
}

std::string cluster_csv(std::span<const ClusterScoreRow> rows) {
  std::set<std::string> conditions;
  for (const auto& r : rows)
    for (const auto& [c, v] : r.condition_means) conditions.insert(c);
  std::string out = "modality,cluster,size,theme";
  for (const auto& c : conditions) out += "," + csv_field("mean:" + c);
  out += ",perturbation_mean,ratio,flag\n";
  for (const auto& r : rows) {
    out += csv_field(r.modality) + "," + (r.cluster_id < 0 ? std::string("noise") : std::to_string(r.cluster_id)) +
           "," + std::to_string(r.size) + "," + csv_field(r.theme);
    for (const auto& c : conditions) {
      auto it = r.condition_means.find(c);
      out += "," + (it == r.condition_means.end() ? std::string() : full(it->second));
    }
    out += "," + (r.perturbation_mean ? full(*r.perturbation_mean) : std::string());
    out += "," + (r.ratio ? full(*r.ratio) : std::string());
    out += std::string(",") + (r.flagged ? "no-ratio" : "") + "\n";
  }
  return out;
}

std::string cluster_markdown(std::span<const ClusterScoreRow> rows, const std::map<std::string, std::string>& prompts,
                             const std::string& metric) {
  std::string md = "| Modality | Cluster | Example prompts | Perturbation-training (all models) " + metric +
                   " | Original prompts " + metric + " | Ratio |\n|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    std::string cluster = r.cluster_id < 0 ? std::string("noise") : std::to_string(r.cluster_id);
    if (!r.theme.empty()) cluster += " (" + r.theme + ")";
    std::string examples;
    for (const auto& id : r.example_ids) {
      auto it = prompts.find(id);
      if (!examples.empty()) examples += " ";
      examples += it == prompts.end() ? id : it->second;
    }
    md += "| " + md_escape(r.modality) + " | " + md_escape(cluster) + " (n=" + std::to_string(r.size) + ") | " +
          md_escape(examples) + " | " + (r.perturbation_mean ? fixed4(*r.perturbation_mean) : "-") + " | " +
          (r.baseline_mean ? fixed4(*r.baseline_mean) : "-") + " | ";
    char ratio[32] = "-";
    if (r.ratio) std::snprintf(ratio, sizeof ratio, "%.2f", *r.ratio);
    md += std::string(ratio) + " |\n";
  }
  return md;
}

}  // namespace gpert

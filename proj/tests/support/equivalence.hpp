#pragma once

// One randomized round of engine-vs-oracle comparisons. Returns an empty
// string when every analysis matches, otherwise a description of the first
// mismatch.

#include <random>
#include <sstream>
#include <string>

#include "prism/confusion.hpp"
#include "prism/duplicates.hpp"
#include "prism/state.hpp"
#include "prism/subgroups.hpp"
#include "support/oracles.hpp"

namespace prism::testing {

inline std::vector<std::string> ids_of(const MetadataTable& t, const std::vector<std::size_t>& rows) {
  std::vector<std::string> out;
  for (auto r : rows) out.emplace_back(t.id(r));
  return out;
}

inline std::string check_view(std::mt19937_64& rng, const RawTable& raw, const MetadataTable& table) {
  ExprPtr filter = rng() % 5 == 0 ? nullptr : random_expr(rng);
  static const std::vector<std::optional<std::string>> group_choices = {std::nullopt, "split", "region", "label",
                                                                        "prediction"};
  auto group_by = group_choices[rng() % group_choices.size()];
  std::set<std::string> selected;
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    if (rng() % 7 == 0) selected.insert(*raw.rows[i][0]);
  }
  if (rng() % 2) selected.insert("not-an-id");
  std::size_t page_size = 1 + rng() % 50;
  std::size_t page = rng() % (raw.rows.size() / page_size + 3);

  AnalysisState state;
  if (filter) state.filter = parse_filter(render(*filter), table.schema());
  state.group_by = group_by;
  state.selected = selected;
  state.page = page;
  state.page_size = page_size;
  // Through the token, as a client would send it.
  auto decoded = decode_state(encode_state(state), table.schema());
  auto view = derive_view(table, decoded);
  auto expect = oracle_view(raw, filter.get(), group_by, selected, page, page_size);

  std::string where = filter ? render(*filter) : std::string("<all>");
  if (ids_of(table, view.filtered) != expect.filtered_ids) return "filtered_ids differ for " + where;
  if (ids_of(table, view.selected_visible) != expect.selected_visible) return "selected_visible differs for " + where;
  if (ids_of(table, view.page) != expect.page_ids) return "page_ids differ for " + where;
  if (view.total_pages() != expect.total_pages) return "total_pages differs";
  if (view.groups.has_value() != expect.groups.has_value()) return "grouping presence differs";
  if (view.groups) {
    if (view.groups->size() != expect.groups->size()) return "group count differs for " + *group_by;
    for (std::size_t g = 0; g < view.groups->size(); ++g) {
      if ((*view.groups)[g].value != (*expect.groups)[g].first) return "group value differs";
      if (ids_of(table, (*view.groups)[g].rows) != (*expect.groups)[g].second) return "group members differ";
    }
  }
  return {};
}

inline std::optional<std::vector<std::size_t>> random_subset(std::mt19937_64& rng, std::size_t n) {
  if (rng() % 3 == 0) return std::nullopt;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < n; ++r) {
    if (rng() % 2) rows.push_back(r);
  }
  return rows;
}

inline RowSubset as_subset(const std::optional<std::vector<std::size_t>>& rows) {
  if (!rows) return std::nullopt;
  return std::span<const std::size_t>(*rows);
}

inline std::string check_confusion(std::mt19937_64& rng, const RawTable& raw, const MetadataTable& table) {
  auto rows = random_subset(rng, raw.rows.size());
  auto m = confusion_matrix(table, "label", "prediction", as_subset(rows));
  auto expect = oracle_confusion(raw, "label", "prediction", rows);
  if (m.classes != expect.classes) return "confusion classes differ";
  for (std::size_t a = 0; a < m.size(); ++a) {
    for (std::size_t b = 0; b < m.size(); ++b) {
      if (m.at(a, b) != expect.counts[a][b]) return "confusion cell differs";
    }
  }
  return {};
}

inline std::string check_hierarchy(std::mt19937_64& rng, const RawTable& raw, const MetadataTable& table) {
  auto classes = oracle_classes(raw, "label", "prediction");
  if (classes.empty()) return {};
  // Extra unobserved leaves are allowed in the hierarchy.
  if (rng() % 2) classes.push_back("unused");
  auto tree = random_tree(rng, classes);
  auto hierarchy = LabelHierarchy::parse(indented(tree));
  auto rows = random_subset(rng, raw.rows.size());
  auto h = hierarchical_confusion(table, "label", "prediction", hierarchy, as_subset(rows));
  std::vector<OracleNode> expect;
  oracle_hierarchy_nodes(tree, raw, "label", "prediction", rows, expect);
  if (h.nodes.size() != expect.size()) return "hierarchy node count differs";
  for (const auto& e : expect) {
    const auto* n = h.find(e.node);
    if (!n) return "hierarchy node " + e.node + " missing";
    if (n->children != e.children) return "children of " + e.node + " differ";
    for (std::size_t a = 0; a < e.counts.size(); ++a) {
      for (std::size_t b = 0; b < e.counts.size(); ++b) {
        if (n->at(a, b) != e.counts[a][b]) return "hierarchy cell differs at " + e.node;
      }
    }
  }
  return {};
}

inline std::string check_subgroups(std::mt19937_64& rng, const RawTable& raw, const MetadataTable& table) {
  static const std::vector<std::vector<std::string>> feature_sets = {
      {}, {"split"}, {"region"}, {"split", "region"}, {"region", "split", "label"}};
  SubgroupOptions options;
  options.features = feature_sets[rng() % feature_sets.size()];
  options.label = "label";
  options.prediction = "prediction";
  options.min_size = rng() % 20;
  auto classes = oracle_classes(raw, "label", "prediction");
  if (rng() % 2 && !classes.empty()) options.positive_class = classes[rng() % classes.size()];
  auto rows = random_subset(rng, raw.rows.size());
  auto report = subgroup_metrics(table, options, as_subset(rows));
  auto expect =
      oracle_subgroups(raw, options.features, "label", "prediction", options.positive_class, options.min_size, rows);
  if (report.rows.size() != expect.size()) return "subgroup count differs";
  for (std::size_t i = 0; i < expect.size(); ++i) {
    const auto& a = report.rows[i];
    const auto& b = expect[i];
    if (a.values != b.values) return "subgroup order or values differ";
    if (a.size != b.size || a.low_support != b.low_support) return "subgroup size differs";
    if (a.accuracy != b.accuracy) return "subgroup accuracy differs";
    if (a.false_positive_rate != b.fpr) return "subgroup FPR differs";
    if (a.false_negative_rate != b.fnr) return "subgroup FNR differs";
  }
  return {};
}

// Random vectors plus planted clusters of near and exact copies.
inline EmbeddingMatrix planted_embeddings(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  auto base = random_embeddings(rng, n, d);
  std::vector<float> v = base.values();
  std::normal_distribution<float> noise(0.0f, 1.0f);
  std::size_t clusters = n / 20 + 1;
  for (std::size_t c = 0; c < clusters; ++c) {
    std::size_t src = rng() % n;
    std::size_t size = 1 + rng() % 7;
    float scale = rng() % 3 == 0 ? 0.0f : 1e-3f;
    for (std::size_t m = 0; m < size; ++m) {
      std::size_t dst = rng() % n;
      if (dst == src) continue;
      for (std::size_t t = 0; t < d; ++t) v[dst * d + t] = v[src * d + t] + scale * noise(rng);
    }
  }
  return EmbeddingMatrix(n, d, std::move(v));
}

inline std::string check_duplicates(std::mt19937_64& rng, std::size_t n) {
  if (n < 2) return {};
  auto emb = planted_embeddings(rng, n, 8);
  static const std::vector<double> taus = {0.0, 1e-6, 1e-3, 0.05, 0.3};
  std::size_t k = 1 + rng() % 6;
  double tau = taus[rng() % taus.size()];
  auto expect = oracle_duplicates(emb, k, tau);
  auto exact = find_duplicates(emb, k, tau, DuplicateSearch::exact);
  if (normalized(exact.groups) != expect) return "exact duplicate groups differ (k=" + std::to_string(k) + ")";
  auto pivot = find_duplicates(emb, k, tau, DuplicateSearch::pivot);
  if (normalized(pivot.groups) != expect) return "pivot duplicate groups differ (k=" + std::to_string(k) + ")";
  return {};
}

inline std::string equivalence_round(std::uint64_t seed, std::size_t max_rows = 1000) {
  std::mt19937_64 rng(seed);
  std::size_t rows = 1 + rng() % max_rows;
  auto raw = random_table(rng, rows, 2 + rng() % 5);
  auto table = raw.ingest();
  if (table.row_count() != rows) return "row count differs after ingest";
  for (auto* check : {check_view, check_confusion, check_hierarchy, check_subgroups}) {
    auto problem = check(rng, raw, table);
    if (!problem.empty()) return "seed " + std::to_string(seed) + ": " + problem;
  }
  auto problem = check_duplicates(rng, rows);
  if (!problem.empty()) return "seed " + std::to_string(seed) + ": " + problem;
  return {};
}

}  // namespace prism::testing

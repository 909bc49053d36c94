#pragma once

// A complete dataset: table, embeddings, every artifact kind, and a dashboard
// spec that shows all of them.

#include <random>

#include "prism/artifacts.hpp"
#include "prism/dashboard.hpp"
#include "support/equivalence.hpp"

namespace prism::testing {

struct Scenario {
  MetadataTable table;
  EmbeddingMatrix embeddings;
  ArtifactSet artifacts;
  DashboardSpec spec;
};

inline ArtifactSet all_artifacts(const MetadataTable& table, const EmbeddingMatrix& emb, const LabelHierarchy& hierarchy,
                                 std::uint64_t seed) {
  ArtifactSet set;
  std::vector<DistributionSummary> summaries;
  for (const char* c : {"split", "region", "score"}) summaries.push_back(column_summary(table, c, 10));
  set.put(AnalysisKind::summary, summary_json(summaries));
  set.put(AnalysisKind::duplicates, duplicates_json(find_duplicates(emb, 5, 0.01), table));
  GmmOptions g;
  g.components = default_components(emb.rows());
  g.seed = seed;
  auto model = fit_gmm(emb, g);
  set.put(AnalysisKind::familiarity, familiarity_json(model, familiarity_scores(model, emb), table, seed));
  set.put(AnalysisKind::projection, projection_json(project_2d(emb), table));
  set.put(AnalysisKind::confusion, confusion_json(confusion_matrix(table, "label", "prediction"), "label", "prediction"));
  set.put(AnalysisKind::hierarchical_confusion,
          hierarchical_confusion_json(hierarchical_confusion(table, "label", "prediction", hierarchy), hierarchy,
                                      "label", "prediction"));
  SubgroupOptions s;
  s.features = {"split"};
  s.label = "label";
  s.prediction = "prediction";
  set.put(AnalysisKind::subgroups, subgroups_json(subgroup_metrics(table, s), "label", "prediction"));
  return set;
}

inline std::vector<ComponentInstance> all_components() {
  using nlohmann::json;
  return {
      {ComponentKind::markdown, json{{"source", "# Audit\nNotes with *emphasis*."}}, WidthHint::full},
      {ComponentKind::list, json{{"columns", {"split", "label", "note"}}}, WidthHint::full},
      {ComponentKind::summary, json{{"columns", {"split", "region", "score"}}}, WidthHint::half},
      {ComponentKind::duplicates, json::object(), WidthHint::half},
      {ComponentKind::familiarity, json::object(), WidthHint::half},
      {ComponentKind::projection, json{{"color_by", "label"}}, WidthHint::half},
      {ComponentKind::confusion, json{{"label", "label"}, {"prediction", "prediction"}}, WidthHint::half},
      {ComponentKind::hierarchical_confusion, json{{"label", "label"}, {"prediction", "prediction"}}, WidthHint::half},
      {ComponentKind::subgroups, json{{"features", {"split"}}, {"label", "label"}, {"prediction", "prediction"}},
       WidthHint::full},
  };
}

// A random valid state over a scenario table, as a client might send.
inline AnalysisState random_state(std::mt19937_64& rng, const MetadataTable& table) {
  AnalysisState state;
  if (rng() % 4) state.filter = parse_filter(render(*random_expr(rng)), table.schema());
  static const std::vector<std::optional<std::string>> group_choices = {std::nullopt, "split", "region", "label"};
  state.group_by = group_choices[rng() % group_choices.size()];
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    if (rng() % 9 == 0) state.selected.insert(std::string(table.id(r)));
  }
  state.page_size = 1 + rng() % 40;
  state.page = rng() % (table.row_count() / state.page_size + 2);
  return state;
}

inline Scenario make_scenario(std::uint64_t seed, std::size_t rows) {
  std::mt19937_64 rng(seed);
  auto raw = random_table(rng, rows, 4);
  auto table = raw.ingest();
  auto emb = planted_embeddings(rng, rows, 8);
  auto classes = confusion_matrix(table, "label", "prediction").classes;
  auto hierarchy = LabelHierarchy::parse(indented(random_tree(rng, classes)));
  auto artifacts = all_artifacts(table, emb, hierarchy, seed);
  AnalysisState state;
  state.filter = parse_filter("split == 'train'", table.schema());
  state.group_by = "label";
  auto spec = build_spec("Scenario " + std::to_string(seed), all_components(),
                         {{"Overview", {0, 1, 2, 6}}, {"Embeddings", {3, 4, 5}}, {"Model", {7, 8}}}, state,
                         table.schema());
  return {std::move(table), std::move(emb), std::move(artifacts), std::move(spec)};
}

}  // namespace prism::testing

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prism/confusion.hpp"
#include "prism/duplicates.hpp"
#include "prism/encoding.hpp"
#include "prism/error.hpp"
#include "prism/gmm.hpp"
#include "prism/io.hpp"
#include "prism/projection.hpp"
#include "prism/subgroups.hpp"
#include "prism/summary.hpp"
#include "prism/table.hpp"

// Analysis results as versioned JSON documents ("<kind>.v1" files). Numbers
// are rounded to 9 significant digits; ids, never row indices, identify rows.
namespace prism {

enum class AnalysisKind { summary, duplicates, familiarity, projection, confusion, hierarchical_confusion, subgroups };

inline constexpr AnalysisKind kAllAnalysisKinds[] = {
    AnalysisKind::summary,    AnalysisKind::duplicates, AnalysisKind::familiarity,
    AnalysisKind::projection, AnalysisKind::confusion,  AnalysisKind::hierarchical_confusion,
    AnalysisKind::subgroups,
};

constexpr std::string_view to_string(AnalysisKind kind) {
  switch (kind) {
    case AnalysisKind::summary: return "summary";
    case AnalysisKind::duplicates: return "duplicates";
    case AnalysisKind::familiarity: return "familiarity";
    case AnalysisKind::projection: return "projection";
    case AnalysisKind::confusion: return "confusion";
    case AnalysisKind::hierarchical_confusion: return "hierarchical_confusion";
    case AnalysisKind::subgroups: return "subgroups";
  }
  return "summary";
}

// Accepts "hierarchy" as a short alias for hierarchical_confusion.
inline std::optional<AnalysisKind> parse_analysis_kind(std::string_view name) {
  if (name == "hierarchy") return AnalysisKind::hierarchical_confusion;
  for (auto kind : kAllAnalysisKinds) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

inline bool needs_embeddings(AnalysisKind kind) {
  return kind == AnalysisKind::duplicates || kind == AnalysisKind::familiarity || kind == AnalysisKind::projection;
}

inline std::string artifact_file_name(AnalysisKind kind) { return std::string(to_string(kind)) + ".v1"; }

inline constexpr int kArtifactVersion = 1;

namespace detail {

inline nlohmann::json number(double v) { return encoding::round_significant(v, 9); }

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? number(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json header(AnalysisKind kind) {
  return {{"kind", to_string(kind)}, {"version", kArtifactVersion}};
}

}  // namespace detail

inline nlohmann::json summary_json(const std::vector<DistributionSummary>& summaries) {
  auto j = detail::header(AnalysisKind::summary);
  j["columns"] = nlohmann::json::array();
  for (const auto& s : summaries) {
    auto bins = nlohmann::json::array();
    for (const auto& b : s.bins) {
      nlohmann::json bin = {{"label", b.label}, {"count", b.count}};
      if (b.lower) bin["lower"] = detail::number(*b.lower);
      if (b.upper) bin["upper"] = detail::number(*b.upper);
      if (b.other) bin["other"] = true;
      bins.push_back(std::move(bin));
    }
    j["columns"].push_back({{"column", s.column},
                            {"kind", to_string(s.kind)},
                            {"total", s.total},
                            {"null_count", s.null_count},
                            {"bins", std::move(bins)}});
  }
  return j;
}

// Groups are re-ordered by id: members ascending, then larger groups first,
// ties by smallest member id.
inline nlohmann::json duplicates_json(const DuplicateGroups& groups, const MetadataTable& table) {
  std::vector<std::vector<std::string>> id_groups;
  for (const auto& g : groups.groups) {
    std::vector<std::string> ids;
    for (auto r : g) ids.emplace_back(table.id(r));
    std::sort(ids.begin(), ids.end());
    id_groups.push_back(std::move(ids));
  }
  std::sort(id_groups.begin(), id_groups.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  auto j = detail::header(AnalysisKind::duplicates);
  j["k"] = groups.k;
  j["tau"] = detail::number(groups.tau);
  j["groups"] = id_groups;
  return j;
}

inline nlohmann::json familiarity_json(const GmmModel& model, const std::vector<double>& scores,
                                       const MetadataTable& table, std::uint64_t seed) {
  auto j = detail::header(AnalysisKind::familiarity);
  j["components"] = model.components;
  j["seed"] = seed;
  j["converged"] = model.converged;
  j["iterations"] = model.iterations;
  j["dropped_components"] = model.dropped;
  j["log_likelihood"] = detail::number(model.final_log_likelihood);
  j["weights"] = nlohmann::json::array();
  for (double w : model.weights) j["weights"].push_back(detail::number(w));
  j["ids"] = nlohmann::json::array();
  j["scores"] = nlohmann::json::array();
  for (std::size_t r = 0; r < scores.size(); ++r) {
    j["ids"].push_back(std::string(table.id(r)));
    j["scores"].push_back(detail::number(scores[r]));
  }
  return j;
}

inline nlohmann::json projection_json(const Projection2D& p, const MetadataTable& table) {
  auto j = detail::header(AnalysisKind::projection);
  j["method"] = to_string(p.method);
  j["seed"] = p.seed;
  if (p.method == ProjectionMethod::pca) {
    j["explained_variance"] = {detail::number(p.explained_variance[0]), detail::number(p.explained_variance[1])};
  }
  j["ids"] = nlohmann::json::array();
  j["x"] = nlohmann::json::array();
  j["y"] = nlohmann::json::array();
  for (std::size_t r = 0; r < p.x.size(); ++r) {
    j["ids"].push_back(std::string(table.id(r)));
    j["x"].push_back(detail::number(p.x[r]));
    j["y"].push_back(detail::number(p.y[r]));
  }
  return j;
}

inline nlohmann::json confusion_json(const ConfusionMatrix& m, std::string_view label, std::string_view pred) {
  auto j = detail::header(AnalysisKind::confusion);
  j["label"] = label;
  j["prediction"] = pred;
  j["classes"] = m.classes;
  j["counts"] = nlohmann::json::array();
  for (std::size_t t = 0; t < m.size(); ++t) {
    auto row = nlohmann::json::array();
    for (std::size_t p = 0; p < m.size(); ++p) row.push_back(m.at(t, p));
    j["counts"].push_back(std::move(row));
  }
  j["total"] = m.total();
  return j;
}

inline nlohmann::json hierarchical_confusion_json(const HierarchicalConfusion& h, const LabelHierarchy& hierarchy,
                                                  std::string_view label, std::string_view pred) {
  auto j = detail::header(AnalysisKind::hierarchical_confusion);
  j["label"] = label;
  j["prediction"] = pred;
  j["hierarchy"] = hierarchy.to_json();
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : h.nodes) {
    auto counts = nlohmann::json::array();
    const std::size_t m = n.children.size() + 1;
    for (std::size_t t = 0; t < m; ++t) {
      auto row = nlohmann::json::array();
      for (std::size_t p = 0; p < m; ++p) row.push_back(n.at(t, p));
      counts.push_back(std::move(row));
    }
    j["nodes"].push_back({{"node", n.node}, {"children", n.children}, {"counts", std::move(counts)}});
  }
  return j;
}

inline nlohmann::json subgroups_json(const SubgroupReport& report, std::string_view label, std::string_view pred) {
  auto j = detail::header(AnalysisKind::subgroups);
  j["label"] = label;
  j["prediction"] = pred;
  j["features"] = report.features;
  j["positive_class"] = report.positive_class ? nlohmann::json(*report.positive_class) : nlohmann::json(nullptr);
  j["min_size"] = report.min_size;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json values = nlohmann::json::object();
    for (std::size_t f = 0; f < report.features.size(); ++f) {
      values[report.features[f]] = row.values[f] ? nlohmann::json(*row.values[f]) : nlohmann::json(nullptr);
    }
    j["rows"].push_back({{"subgroup", std::move(values)},
                         {"size", row.size},
                         {"accuracy", detail::number(row.accuracy)},
                         {"false_positive_rate", detail::optional_number(row.false_positive_rate)},
                         {"false_negative_rate", detail::optional_number(row.false_negative_rate)},
                         {"low_support", row.low_support}});
  }
  return j;
}

// Canonical on-disk bytes: minified, key-sorted JSON plus a newline.
inline std::string artifact_bytes(const nlohmann::json& artifact) {
  return encoding::canonical_dump(artifact) + "\n";
}

// Ids an artifact refers to; used to check artifacts against a table.
inline std::vector<std::string> referenced_ids(const nlohmann::json& artifact) {
  std::vector<std::string> ids;
  if (artifact.contains("ids") && artifact["ids"].is_array()) {
    for (const auto& id : artifact["ids"]) {
      if (id.is_string()) ids.push_back(id.get<std::string>());
    }
  }
  if (artifact.value("kind", "") == "duplicates" && artifact.contains("groups") && artifact["groups"].is_array()) {
    for (const auto& g : artifact["groups"]) {
      if (!g.is_array()) continue;
      for (const auto& id : g) {
        if (id.is_string()) ids.push_back(id.get<std::string>());
      }
    }
  }
  return ids;
}

// The computed analyses available to a dashboard, keyed by kind.
class ArtifactSet {
 public:
  void put(AnalysisKind kind, nlohmann::json artifact) { items_[kind] = std::move(artifact); }
  bool contains(AnalysisKind kind) const { return items_.contains(kind); }
  const nlohmann::json* find(AnalysisKind kind) const {
    auto it = items_.find(kind);
    return it == items_.end() ? nullptr : &it->second;
  }
  const std::map<AnalysisKind, nlohmann::json>& items() const { return items_; }
  bool empty() const { return items_.empty(); }

  // Reads every "<kind>.v1" file present in `dir`.
  static ArtifactSet load_dir(const std::filesystem::path& dir) {
    ArtifactSet set;
    for (auto kind : kAllAnalysisKinds) {
      auto path = dir / artifact_file_name(kind);
      if (!std::filesystem::exists(path)) continue;
      set.put(kind, parse_artifact(io::read_file(path), path.string()));
    }
    return set;
  }

  static nlohmann::json parse_artifact(std::string_view bytes, const std::string& where) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::MalformedArtifact, where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
      fail(ErrorCode::MalformedArtifact, where + ": missing \"kind\"");
    }
    if (j.value("version", 0) != kArtifactVersion) {
      fail(ErrorCode::UnsupportedVersion, where + ": unsupported artifact version");
    }
    return j;
  }

 private:
  std::map<AnalysisKind, nlohmann::json> items_;
};

}  // namespace prism

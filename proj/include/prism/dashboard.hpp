#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prism/artifacts.hpp"
#include "prism/error.hpp"
#include "prism/state.hpp"
#include "prism/table.hpp"

namespace prism {

enum class ComponentKind {
  markdown,
  list,
  summary,
  duplicates,
  familiarity,
  projection,
  confusion,
  hierarchical_confusion,
  subgroups,
};

inline constexpr ComponentKind kAllComponentKinds[] = {
    ComponentKind::markdown,   ComponentKind::list,      ComponentKind::summary,
    ComponentKind::duplicates, ComponentKind::familiarity, ComponentKind::projection,
    ComponentKind::confusion,  ComponentKind::hierarchical_confusion, ComponentKind::subgroups,
};

constexpr std::string_view to_string(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::markdown: return "markdown";
    case ComponentKind::list: return "list";
    case ComponentKind::summary: return "summary";
    case ComponentKind::duplicates: return "duplicates";
    case ComponentKind::familiarity: return "familiarity";
    case ComponentKind::projection: return "projection";
    case ComponentKind::confusion: return "confusion";
    case ComponentKind::hierarchical_confusion: return "hierarchical_confusion";
    case ComponentKind::subgroups: return "subgroups";
  }
  return "markdown";
}

inline std::optional<ComponentKind> parse_component_kind(std::string_view name) {
  for (auto kind : kAllComponentKinds) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

// The analysis a component displays, if any (markdown and list need none).
inline std::optional<AnalysisKind> required_artifact(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::markdown:
    case ComponentKind::list: return std::nullopt;
    case ComponentKind::summary: return AnalysisKind::summary;
    case ComponentKind::duplicates: return AnalysisKind::duplicates;
    case ComponentKind::familiarity: return AnalysisKind::familiarity;
    case ComponentKind::projection: return AnalysisKind::projection;
    case ComponentKind::confusion: return AnalysisKind::confusion;
    case ComponentKind::hierarchical_confusion: return AnalysisKind::hierarchical_confusion;
    case ComponentKind::subgroups: return AnalysisKind::subgroups;
  }
  return std::nullopt;
}

enum class WidthHint { half, full };

struct ComponentInstance {
  ComponentKind kind = ComponentKind::markdown;
  nlohmann::json config = nlohmann::json::object();
  WidthHint width = WidthHint::full;
};

struct DashboardPage {
  std::string name;
  std::vector<ComponentInstance> components;
};

struct PageAssignment {
  std::string name;
  std::vector<std::size_t> components;  // indices into the component list
};

inline constexpr int kSpecVersion = 1;

struct DashboardSpec {
  std::string title;
  std::vector<DashboardPage> pages;
  AnalysisState initial_state;
  std::optional<std::string> instance_base_uri;
  Schema schema;
};

namespace detail {

// Config checks per kind. Each problem is appended, prefixed by `where`.
inline void check_component(const ComponentInstance& c, const Schema& schema, const std::string& where,
                            std::vector<std::string>& problems) {
  const auto& cfg = c.config;
  if (!cfg.is_object()) {
    problems.push_back(where + ": config must be an object");
    return;
  }
  auto column_field = [&](const char* key, bool required, bool categorical) {
    if (!cfg.contains(key)) {
      if (required) problems.push_back(where + ": config." + key + " is required");
      return;
    }
    if (!cfg[key].is_string()) {
      problems.push_back(where + ": config." + key + " must be a column name");
      return;
    }
    auto name = cfg[key].get<std::string>();
    const ColumnSpec* spec = find_spec(schema, name);
    if (!spec) {
      problems.push_back(where + ": config." + key + " references missing column '" + name + "'");
    } else if (categorical && !is_categorical_valued(spec->kind)) {
      problems.push_back(where + ": config." + key + " column '" + name + "' is not categorical");
    }
  };
  auto column_list = [&](const char* key, bool required, bool categorical) {
    if (!cfg.contains(key)) {
      if (required) problems.push_back(where + ": config." + key + " is required");
      return;
    }
    if (!cfg[key].is_array()) {
      problems.push_back(where + ": config." + key + " must be a list of column names");
      return;
    }
    for (const auto& item : cfg[key]) {
      if (!item.is_string()) {
        problems.push_back(where + ": config." + key + " must contain only column names");
        continue;
      }
      auto name = item.get<std::string>();
      const ColumnSpec* spec = find_spec(schema, name);
      if (!spec) {
        problems.push_back(where + ": config." + key + " references missing column '" + name + "'");
      } else if (categorical && !is_categorical_valued(spec->kind)) {
        problems.push_back(where + ": config." + key + " column '" + name + "' is not categorical");
      }
    }
  };

  switch (c.kind) {
    case ComponentKind::markdown:
      if (!cfg.contains("source") || !cfg["source"].is_string()) {
        problems.push_back(where + ": markdown needs config.source text");
      }
      break;
    case ComponentKind::list:
      column_list("columns", false, false);
      column_field("uri_column", false, false);
      if (cfg.contains("media_kind")) {
        auto mk = cfg["media_kind"].is_string() ? cfg["media_kind"].get<std::string>() : "";
        if (mk != "image" && mk != "audio" && mk != "other") {
          problems.push_back(where + ": config.media_kind must be image, audio or other");
        }
      }
      break;
    case ComponentKind::summary:
      column_list("columns", true, false);
      break;
    case ComponentKind::projection:
      column_field("color_by", false, false);
      break;
    case ComponentKind::confusion:
    case ComponentKind::hierarchical_confusion:
      column_field("label", true, true);
      column_field("prediction", true, true);
      break;
    case ComponentKind::subgroups:
      column_list("features", true, true);
      column_field("label", true, true);
      column_field("prediction", true, true);
      break;
    case ComponentKind::duplicates:
    case ComponentKind::familiarity:
      break;
  }
}

}  // namespace detail

// Assembles and validates a dashboard. All problems are collected and thrown
// together as ValidationErrors.
inline DashboardSpec build_spec(std::string title, const std::vector<ComponentInstance>& components,
                                const std::vector<PageAssignment>& pages, AnalysisState state, const Schema& schema,
                                std::optional<std::string> instance_base_uri = std::nullopt) {
  std::vector<std::string> problems;
  if (pages.empty()) problems.push_back("dashboard needs at least one page");
  std::set<std::string> names;
  for (std::size_t p = 0; p < pages.size(); ++p) {
    const auto& page = pages[p];
    if (page.name.empty()) problems.push_back("page " + std::to_string(p) + ": name is empty");
    if (!names.insert(page.name).second) problems.push_back("page " + std::to_string(p) + ": duplicate page name '" + page.name + "'");
    for (auto idx : page.components) {
      if (idx >= components.size()) {
        problems.push_back("page '" + page.name + "': component index " + std::to_string(idx) + " is not declared");
      }
    }
  }
  for (std::size_t i = 0; i < components.size(); ++i) {
    detail::check_component(components[i], schema,
                            "component " + std::to_string(i) + " (" + std::string(to_string(components[i].kind)) + ")",
                            problems);
  }
  try {
    validate_state(state, schema);
  } catch (const Error& e) {
    problems.push_back("initial state: " + e.detail());
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));

  DashboardSpec spec;
  spec.title = std::move(title);
  for (const auto& page : pages) {
    DashboardPage out{page.name, {}};
    for (auto idx : page.components) out.components.push_back(components[idx]);
    spec.pages.push_back(std::move(out));
  }
  spec.initial_state = std::move(state);
  spec.instance_base_uri = std::move(instance_base_uri);
  spec.schema = schema;
  return spec;
}

inline nlohmann::json schema_json(const Schema& schema) {
  auto j = nlohmann::json::array();
  for (const auto& c : schema) j.push_back({{"name", c.name}, {"kind", to_string(c.kind)}, {"nullable", c.nullable}});
  return j;
}

inline Schema schema_from_json(const nlohmann::json& j) {
  if (!j.is_array()) fail(ErrorCode::SchemaError, "schema must be an array");
  Schema schema;
  for (const auto& c : j) {
    if (!c.is_object() || !c.contains("name") || !c["name"].is_string() || !c.contains("kind") ||
        !c["kind"].is_string()) {
      fail(ErrorCode::SchemaError, "schema entries need string name and kind");
    }
    auto kind = parse_column_kind(c["kind"].get<std::string>());
    if (!kind) fail(ErrorCode::SchemaError, "unknown column kind '" + c["kind"].get<std::string>() + "'");
    schema.push_back({c["name"].get<std::string>(), *kind, c.value("nullable", false)});
  }
  return schema;
}

inline nlohmann::json component_json(const ComponentInstance& c) {
  return {{"kind", to_string(c.kind)}, {"config", c.config}, {"width", c.width == WidthHint::half ? "half" : "full"}};
}

inline ComponentInstance component_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw ValidationError({where + ": component needs a string kind"});
  }
  auto kind = parse_component_kind(j["kind"].get<std::string>());
  if (!kind) throw ValidationError({where + ": unknown component kind '" + j["kind"].get<std::string>() + "'"});
  ComponentInstance c;
  c.kind = *kind;
  c.config = j.value("config", nlohmann::json::object());
  auto width = j.value("width", std::string("full"));
  if (width != "full" && width != "half") throw ValidationError({where + ": width must be half or full"});
  c.width = width == "half" ? WidthHint::half : WidthHint::full;
  return c;
}

inline nlohmann::json spec_json(const DashboardSpec& spec) {
  nlohmann::json j;
  j["version"] = kSpecVersion;
  j["title"] = spec.title;
  j["instance_base_uri"] = spec.instance_base_uri ? nlohmann::json(*spec.instance_base_uri) : nlohmann::json(nullptr);
  j["initial_state"] = encode_state(spec.initial_state);
  j["schema"] = schema_json(spec.schema);
  j["pages"] = nlohmann::json::array();
  for (const auto& page : spec.pages) {
    auto comps = nlohmann::json::array();
    for (const auto& c : page.components) comps.push_back(component_json(c));
    j["pages"].push_back({{"name", page.name}, {"components", std::move(comps)}});
  }
  return j;
}

// Reads a spec.v1 document; rejects other versions.
inline DashboardSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::SchemaError, "spec must be an object");
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kSpecVersion) {
    fail(ErrorCode::UnsupportedVersion,
         "spec version " + (j.contains("version") ? j["version"].dump() : std::string("(missing)")) +
             " is not supported (expected " + std::to_string(kSpecVersion) + ")");
  }
  DashboardSpec spec;
  spec.schema = schema_from_json(j.at("schema"));
  spec.title = j.value("title", std::string{});
  if (j.contains("instance_base_uri") && j["instance_base_uri"].is_string()) {
    spec.instance_base_uri = j["instance_base_uri"].get<std::string>();
  }
  spec.initial_state = decode_state(j.value("initial_state", encode_state(AnalysisState{})), spec.schema);
  if (!j.contains("pages") || !j["pages"].is_array()) fail(ErrorCode::SchemaError, "spec needs a pages array");
  for (const auto& page : j["pages"]) {
    DashboardPage p;
    p.name = page.value("name", std::string{});
    for (const auto& c : page.value("components", nlohmann::json::array())) {
      p.components.push_back(component_from_json(c, "page '" + p.name + "'"));
    }
    spec.pages.push_back(std::move(p));
  }
  return spec;
}

// Authoring document accepted by `prism export` and `prism serve`:
//   {"title": "...", "components": [{"kind", "config", "width"}, ...],
//    "pages": [{"name": "...", "components": [0, 1]}],
//    "initial_state": "<state token>", "instance_base_uri": "..."}
inline DashboardSpec spec_from_authoring(const nlohmann::json& j, const Schema& schema) {
  if (!j.is_object()) throw ValidationError({"dashboard document must be an object"});
  std::vector<std::string> problems;
  std::vector<ComponentInstance> components;
  for (std::size_t i = 0; i < j.value("components", nlohmann::json::array()).size(); ++i) {
    try {
      components.push_back(component_from_json(j["components"][i], "component " + std::to_string(i)));
    } catch (const ValidationError& e) {
      problems.insert(problems.end(), e.problems().begin(), e.problems().end());
      components.push_back(ComponentInstance{ComponentKind::markdown, {{"source", ""}}, WidthHint::full});
    }
  }
  std::vector<PageAssignment> pages;
  for (const auto& page : j.value("pages", nlohmann::json::array())) {
    PageAssignment a;
    a.name = page.value("name", std::string{});
    for (const auto& idx : page.value("components", nlohmann::json::array())) {
      if (!idx.is_number_integer() || idx.get<std::int64_t>() < 0) {
        problems.push_back("page '" + a.name + "': component references must be indices");
        continue;
      }
      a.components.push_back(idx.get<std::size_t>());
    }
    pages.push_back(std::move(a));
  }
  AnalysisState state;
  if (j.contains("initial_state") && j["initial_state"].is_string()) {
    try {
      state = decode_state(j["initial_state"].get<std::string>(), schema);
    } catch (const Error& e) {
      problems.push_back("initial_state: " + std::string(e.what()));
    }
  }
  std::optional<std::string> base;
  if (j.contains("instance_base_uri") && j["instance_base_uri"].is_string()) {
    base = j["instance_base_uri"].get<std::string>();
  }
  try {
    auto spec = build_spec(j.value("title", std::string("Dashboard")), components, pages, state, schema, base);
    if (!problems.empty()) throw ValidationError(problems);
    return spec;
  } catch (const ValidationError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    throw ValidationError(std::move(problems));
  }
}

}  // namespace prism

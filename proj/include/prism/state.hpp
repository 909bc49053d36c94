#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/encoding.hpp"
#include "prism/error.hpp"
#include "prism/filter.hpp"
#include "prism/table.hpp"

namespace prism {

inline constexpr std::size_t kDefaultPageSize = 20;
inline constexpr std::size_t kMaxPageSize = 10000;

// The shared filter / group / selection / page tuple every view is derived from.
struct AnalysisState {
  FilterPredicate filter;
  std::optional<std::string> group_by;
  std::set<std::string> selected;
  std::size_t page = 0;
  std::size_t page_size = kDefaultPageSize;

  friend bool operator==(const AnalysisState&, const AnalysisState&) = default;
};

// Throws InvalidState listing every field that does not fit the schema.
inline void validate_state(const AnalysisState& state, const Schema& schema) {
  std::vector<std::string> problems;
  if (state.group_by) {
    const ColumnSpec* spec = find_spec(schema, *state.group_by);
    if (!spec) {
      problems.push_back("group_by: unknown column '" + *state.group_by + "'");
    } else if (!is_categorical_valued(spec->kind)) {
      problems.push_back("group_by: column '" + *state.group_by + "' is " + std::string(to_string(spec->kind)) +
                         ", not categorical");
    }
  }
  if (state.page_size < 1 || state.page_size > kMaxPageSize) {
    problems.push_back("page_size: " + std::to_string(state.page_size) + " is outside [1, " +
                       std::to_string(kMaxPageSize) + "]");
  }
  if (!state.filter.matches_all()) {
    // Re-binding the canonical text catches predicates built for another schema.
    try {
      parse_filter(state.filter.to_string(), schema);
    } catch (const Error& e) {
      problems.push_back("filter: " + e.detail());
    }
  }
  if (!problems.empty()) {
    std::string message;
    for (const auto& p : problems) message += (message.empty() ? "" : "; ") + p;
    fail(ErrorCode::InvalidState, message);
  }
}

struct ViewGroup {
  std::optional<std::string> value;  // nullopt collects rows with a null group value
  std::vector<std::size_t> rows;
};

// Everything a component needs from the state. Row indices stand in for ids;
// view_payload() turns them into ids.
struct DerivedView {
  std::vector<std::size_t> filtered;
  std::optional<std::vector<ViewGroup>> groups;
  std::vector<std::size_t> selected_visible;
  std::vector<std::size_t> page;
  std::size_t page_index = 0;
  std::size_t page_size = kDefaultPageSize;

  std::size_t total_pages() const { return (filtered.size() + page_size - 1) / page_size; }
};

inline std::vector<std::size_t> paginate(const std::vector<std::size_t>& filtered, std::size_t page,
                                         std::size_t page_size) {
  if (page_size < 1) fail(ErrorCode::InvalidArgument, "page_size must be at least 1");
  if (page >= (filtered.size() + page_size - 1) / page_size) return {};
  auto begin = filtered.begin() + static_cast<std::ptrdiff_t>(page * page_size);
  auto end = filtered.begin() + static_cast<std::ptrdiff_t>(std::min(filtered.size(), (page + 1) * page_size));
  return {begin, end};
}

inline std::vector<std::size_t> paginate(const DerivedView& view, std::size_t page, std::size_t page_size) {
  return paginate(view.filtered, page, page_size);
}

inline DerivedView derive_view(const MetadataTable& table, const AnalysisState& state) {
  validate_state(state, table.schema());
  DerivedView view;
  view.page_index = state.page;
  view.page_size = state.page_size;

  if (state.filter.matches_all()) {
    view.filtered.resize(table.row_count());
    for (std::size_t r = 0; r < table.row_count(); ++r) view.filtered[r] = r;
  } else {
    auto mask = state.filter.evaluate(table);
    for (std::size_t r = 0; r < mask.size(); ++r) {
      if (mask[r]) view.filtered.push_back(r);
    }
  }

  if (state.group_by) {
    const Column& column = table.column(*state.group_by);
    std::vector<std::vector<std::size_t>> by_code(column.dictionary().size());
    std::vector<std::size_t> nulls;
    for (std::size_t r : view.filtered) {
      auto code = column.code(r);
      (code == Column::kNullCode ? nulls : by_code[static_cast<std::size_t>(code)]).push_back(r);
    }
    std::vector<ViewGroup> groups;
    for (std::size_t c = 0; c < by_code.size(); ++c) {
      if (!by_code[c].empty()) groups.push_back({column.dictionary()[c], std::move(by_code[c])});
    }
    std::sort(groups.begin(), groups.end(), [](const ViewGroup& a, const ViewGroup& b) { return *a.value < *b.value; });
    if (!nulls.empty()) groups.push_back({std::nullopt, std::move(nulls)});
    view.groups = std::move(groups);
  }

  if (!state.selected.empty()) {
    std::vector<std::uint8_t> chosen(table.row_count(), 0);
    for (const auto& id : state.selected) {
      if (auto row = table.row_of(id)) chosen[*row] = 1;
    }
    for (std::size_t r : view.filtered) {
      if (chosen[r]) view.selected_visible.push_back(r);
    }
  }

  view.page = paginate(view.filtered, state.page, state.page_size);
  return view;
}

// ---------------------------------------------------------------------------
// State tokens: URL-safe base64 (no padding) of the minified, key-sorted JSON
// object {"filter", "group_by", "page", "page_size", "selected"}.

inline nlohmann::json state_to_json(const AnalysisState& state) {
  nlohmann::json j = nlohmann::json::object();
  j["filter"] = state.filter.to_string();
  j["group_by"] = state.group_by ? nlohmann::json(*state.group_by) : nlohmann::json(nullptr);
  j["page"] = state.page;
  j["page_size"] = state.page_size;
  j["selected"] = nlohmann::json::array();
  for (const auto& id : state.selected) j["selected"].push_back(id);  // std::set iterates sorted
  return j;
}

inline std::string encode_state(const AnalysisState& state) {
  return encoding::base64url_encode(state_to_json(state).dump());
}

inline AnalysisState state_from_json(const nlohmann::json& j, const Schema& schema) {
  auto malformed = [](const std::string& why) { fail(ErrorCode::MalformedToken, why); };
  if (!j.is_object()) malformed("state is not an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "filter" && key != "group_by" && key != "page" && key != "page_size" && key != "selected") {
      malformed("unknown state field '" + key + "'");
    }
  }
  AnalysisState state;
  std::string filter_text;
  if (j.contains("filter")) {
    if (!j["filter"].is_string()) malformed("filter must be a string");
    filter_text = j["filter"].get<std::string>();
  }
  if (j.contains("group_by") && !j["group_by"].is_null()) {
    if (!j["group_by"].is_string()) malformed("group_by must be a string or null");
    state.group_by = j["group_by"].get<std::string>();
  }
  for (const char* key : {"page", "page_size"}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_number_unsigned()) malformed(std::string(key) + " must be a non-negative integer");
  }
  if (j.contains("page")) state.page = j["page"].get<std::size_t>();
  if (j.contains("page_size")) state.page_size = j["page_size"].get<std::size_t>();
  if (j.contains("selected")) {
    if (!j["selected"].is_array()) malformed("selected must be an array");
    for (const auto& id : j["selected"]) {
      if (!id.is_string()) malformed("selected ids must be strings");
      state.selected.insert(id.get<std::string>());
    }
  }
  try {
    state.filter = parse_filter(filter_text, schema);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SyntaxError) malformed("filter: " + e.detail());
    fail(ErrorCode::InvalidState, "filter: " + e.detail());
  }
  validate_state(state, schema);
  return state;
}

inline AnalysisState decode_state(std::string_view token, const Schema& schema) {
  auto bytes = encoding::base64url_decode(token);
  if (!bytes) fail(ErrorCode::MalformedToken, "token is not unpadded URL-safe base64");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(*bytes);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedToken, std::string("token payload is not valid JSON: ") + e.what());
  }
  return state_from_json(j, schema);
}

// ---------------------------------------------------------------------------
// Wire form of a derived view; shared by the live service and bundle readers.

inline nlohmann::json ids_json(const MetadataTable& table, const std::vector<std::size_t>& rows) {
  auto out = nlohmann::json::array();
  for (std::size_t r : rows) out.push_back(std::string(table.id(r)));
  return out;
}

inline nlohmann::json view_payload(const MetadataTable& table, const DerivedView& view) {
  nlohmann::json j = nlohmann::json::object();
  j["filtered_ids"] = ids_json(table, view.filtered);
  if (view.groups) {
    auto groups = nlohmann::json::array();
    for (const auto& g : *view.groups) {
      groups.push_back({{"value", g.value ? nlohmann::json(*g.value) : nlohmann::json(nullptr)},
                        {"ids", ids_json(table, g.rows)}});
    }
    j["groups"] = std::move(groups);
  } else {
    j["groups"] = nullptr;
  }
  j["selected_visible"] = ids_json(table, view.selected_visible);
  j["page_ids"] = ids_json(table, view.page);
  j["page"] = view.page_index;
  j["page_size"] = view.page_size;
  j["total"] = view.filtered.size();
  j["total_pages"] = view.total_pages();
  return j;
}

}  // namespace prism

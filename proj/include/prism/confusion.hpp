#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "prism/error.hpp"
#include "prism/table.hpp"

namespace prism {

using RowSubset = std::optional<std::span<const std::size_t>>;

// Rows are true labels, columns are predictions, both indexed by `classes`.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::uint64_t> counts;

  std::size_t size() const { return classes.size(); }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * classes.size() + predicted]; }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
  std::optional<std::size_t> index_of(std::string_view name) const {
    auto it = std::lower_bound(classes.begin(), classes.end(), name);
    if (it == classes.end() || *it != name) return std::nullopt;
    return static_cast<std::size_t>(it - classes.begin());
  }
};

namespace detail {

inline const Column& categorical_column(const MetadataTable& table, std::string_view name) {
  const Column& c = table.column(name);
  if (!is_categorical_valued(c.kind())) {
    fail(ErrorCode::NonCategorical, "column '" + c.name() + "' is " + std::string(to_string(c.kind())) +
                                        ", expected categorical, label or prediction");
  }
  return c;
}

// Sorted union of non-null values in both columns, over the whole table.
inline std::vector<std::string> observed_classes(const Column& label, const Column& pred) {
  std::vector<std::string> classes;
  std::vector<bool> used_label(label.dictionary().size(), false);
  std::vector<bool> used_pred(pred.dictionary().size(), false);
  for (std::size_t r = 0; r < label.size(); ++r) {
    if (auto c = label.code(r); c != Column::kNullCode) used_label[static_cast<std::size_t>(c)] = true;
    if (auto c = pred.code(r); c != Column::kNullCode) used_pred[static_cast<std::size_t>(c)] = true;
  }
  for (std::size_t c = 0; c < used_label.size(); ++c) {
    if (used_label[c]) classes.push_back(label.dictionary()[c]);
  }
  for (std::size_t c = 0; c < used_pred.size(); ++c) {
    if (used_pred[c]) classes.push_back(pred.dictionary()[c]);
  }
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

// Maps a column's dictionary codes onto positions in `classes`.
inline std::vector<std::int64_t> code_map(const Column& column, const std::vector<std::string>& classes) {
  std::vector<std::int64_t> out(column.dictionary().size(), -1);
  for (std::size_t c = 0; c < out.size(); ++c) {
    auto it = std::lower_bound(classes.begin(), classes.end(), column.dictionary()[c]);
    if (it != classes.end() && *it == column.dictionary()[c]) out[c] = it - classes.begin();
  }
  return out;
}

template <typename Fn>
void for_each_row(std::size_t row_count, const RowSubset& rows, Fn&& fn) {
  if (rows) {
    for (std::size_t r : *rows) fn(r);
  } else {
    for (std::size_t r = 0; r < row_count; ++r) fn(r);
  }
}

}  // namespace detail

// Counts (label, prediction) pairs over `rows` (all rows when absent). Classes
// are the sorted union of labels and predictions seen anywhere in the table;
// rows with a null label or prediction are not scored.
inline ConfusionMatrix confusion_matrix(const MetadataTable& table, std::string_view label_col,
                                        std::string_view pred_col, const RowSubset& rows = std::nullopt) {
  const Column& label = detail::categorical_column(table, label_col);
  const Column& pred = detail::categorical_column(table, pred_col);
  ConfusionMatrix m;
  m.classes = detail::observed_classes(label, pred);
  const std::size_t k = m.classes.size();
  m.counts.assign(k * k, 0);
  auto lmap = detail::code_map(label, m.classes);
  auto pmap = detail::code_map(pred, m.classes);
  detail::for_each_row(table.row_count(), rows, [&](std::size_t r) {
    auto lc = label.code(r);
    auto pc = pred.code(r);
    if (lc == Column::kNullCode || pc == Column::kNullCode) return;
    auto t = static_cast<std::size_t>(lmap[static_cast<std::size_t>(lc)]);
    auto p = static_cast<std::size_t>(pmap[static_cast<std::size_t>(pc)]);
    ++m.counts[t * k + p];
  });
  return m;
}

// Rooted class taxonomy whose leaves are the classes.
class LabelHierarchy {
 public:
  struct Node {
    std::string name;
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;
  };

  // Indented text: one node name per line, children indented deeper than
  // their parent (spaces only). Blank lines and lines starting with '#' are
  // ignored. Example:
  //
  //   root
  //     animal
  //       cat
  //       dog
  //     vehicle
  //       car
  static LabelHierarchy parse_indented(std::string_view text) {
    LabelHierarchy h;
    std::vector<std::pair<std::size_t, std::size_t>> stack;  // (indent, node)
    std::size_t line_no = 0;
    while (!text.empty()) {
      auto nl = text.find('\n');
      std::string_view line = text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      std::size_t indent = 0;
      while (indent < line.size() && line[indent] == ' ') ++indent;
      if (indent < line.size() && line[indent] == '\t') {
        fail(ErrorCode::MalformedHierarchy, "line " + std::to_string(line_no) + ": tabs are not allowed for indentation");
      }
      std::string_view name = line.substr(indent);
      while (!name.empty() && (name.back() == ' ' || name.back() == '\t')) name.remove_suffix(1);
      if (name.empty() || name.front() == '#') continue;
      while (!stack.empty() && stack.back().first >= indent) stack.pop_back();
      if (stack.empty() && !h.nodes_.empty()) {
        fail(ErrorCode::MalformedHierarchy, "line " + std::to_string(line_no) + ": second root '" + std::string(name) + "'");
      }
      std::optional<std::size_t> parent;
      if (!stack.empty()) parent = stack.back().second;
      std::size_t id = h.add(std::string(name), parent);
      stack.emplace_back(indent, id);
    }
    h.finish();
    return h;
  }

  // Nested JSON: {"name": "root", "children": [{"name": "cat"}, ...]}.
  static LabelHierarchy parse_json(const nlohmann::json& j) {
    LabelHierarchy h;
    h.add_json(j, std::nullopt);
    h.finish();
    return h;
  }

  // JSON when the text starts with '{', indented text otherwise.
  static LabelHierarchy parse(std::string_view text) {
    auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && text[first] == '{') {
      try {
        return parse_json(nlohmann::json::parse(text));
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedHierarchy, e.what());
      }
    }
    return parse_indented(text);
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::size_t root() const { return 0; }
  bool is_leaf(std::size_t i) const { return nodes_[i].children.empty(); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::size_t> leaves_under(std::size_t node) const {
    std::vector<std::size_t> out;
    std::vector<std::size_t> todo{node};
    while (!todo.empty()) {
      auto n = todo.back();
      todo.pop_back();
      if (is_leaf(n)) out.push_back(n);
      for (auto it = nodes_[n].children.rbegin(); it != nodes_[n].children.rend(); ++it) todo.push_back(*it);
    }
    return out;
  }

  // Internal nodes in pre-order.
  std::vector<std::size_t> internal_nodes() const {
    std::vector<std::size_t> out;
    std::vector<std::size_t> todo{root()};
    while (!todo.empty()) {
      auto n = todo.back();
      todo.pop_back();
      if (is_leaf(n)) continue;
      out.push_back(n);
      for (auto it = nodes_[n].children.rbegin(); it != nodes_[n].children.rend(); ++it) todo.push_back(*it);
    }
    return out;
  }

  nlohmann::json to_json(std::size_t node = 0) const {
    nlohmann::json j = {{"name", nodes_[node].name}};
    if (!is_leaf(node)) {
      j["children"] = nlohmann::json::array();
      for (auto c : nodes_[node].children) j["children"].push_back(to_json(c));
    }
    return j;
  }

 private:
  std::size_t add(std::string name, std::optional<std::size_t> parent) {
    if (name.empty()) fail(ErrorCode::MalformedHierarchy, "empty node name");
    if (!by_name_.try_emplace(name, nodes_.size()).second) {
      fail(ErrorCode::MalformedHierarchy, "node name '" + name + "' appears twice");
    }
    nodes_.push_back({std::move(name), parent, {}});
    if (parent) nodes_[*parent].children.push_back(nodes_.size() - 1);
    return nodes_.size() - 1;
  }

  void add_json(const nlohmann::json& j, std::optional<std::size_t> parent) {
    if (!j.is_object() || !j.contains("name") || !j["name"].is_string()) {
      fail(ErrorCode::MalformedHierarchy, "every node needs a string \"name\"");
    }
    auto id = add(j["name"].get<std::string>(), parent);
    if (j.contains("children")) {
      if (!j["children"].is_array()) fail(ErrorCode::MalformedHierarchy, "\"children\" must be an array");
      for (const auto& c : j["children"]) add_json(c, id);
    }
  }

  void finish() {
    if (nodes_.empty()) fail(ErrorCode::MalformedHierarchy, "hierarchy is empty");
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

// Confusion at one internal node over its children plus an "outside" slot
// (index children.size()) for leaves outside this node's subtree.
struct NodeConfusion {
  std::string node;
  std::vector<std::string> children;
  std::vector<std::uint64_t> counts;  // (m+1) x (m+1), row = truth

  std::size_t outside() const { return children.size(); }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * (children.size() + 1) + predicted];
  }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

struct HierarchicalConfusion {
  std::vector<NodeConfusion> nodes;  // internal nodes, pre-order, root first

  const NodeConfusion* find(std::string_view name) const {
    for (const auto& n : nodes) {
      if (n.node == name) return &n;
    }
    return nullptr;
  }
};

// For every internal node, a scored row (true leaf t, predicted leaf p) is
// credited to (child containing t, child containing p), using the outside
// slot for a side that falls outside the node's subtree. Rows with both
// leaves outside the subtree are not counted at that node.
inline HierarchicalConfusion hierarchical_confusion(const MetadataTable& table, std::string_view label_col,
                                                    std::string_view pred_col, const LabelHierarchy& hierarchy,
                                                    const RowSubset& rows = std::nullopt) {
  auto flat = confusion_matrix(table, label_col, pred_col, rows);
  const std::size_t k = flat.size();
  std::vector<std::size_t> leaf_of(k);
  for (std::size_t c = 0; c < k; ++c) {
    auto node = hierarchy.find(flat.classes[c]);
    if (!node || !hierarchy.is_leaf(*node)) {
      fail(ErrorCode::UnknownClass, "class \"" + flat.classes[c] + "\" is not a leaf of the hierarchy");
    }
    leaf_of[c] = *node;
  }

  HierarchicalConfusion out;
  const auto internal = hierarchy.internal_nodes();
  for (std::size_t node : internal) {
    const auto& children = hierarchy.node(node).children;
    NodeConfusion nc;
    nc.node = hierarchy.node(node).name;
    const std::size_t m = children.size();
    for (auto c : children) nc.children.push_back(hierarchy.node(c).name);
    // slot[leaf] = index of the child containing the leaf, or the outside slot.
    std::vector<std::size_t> slot(hierarchy.nodes().size(), m);
    for (std::size_t ci = 0; ci < m; ++ci) {
      for (auto leaf : hierarchy.leaves_under(children[ci])) slot[leaf] = ci;
    }
    nc.counts.assign((m + 1) * (m + 1), 0);
    for (std::size_t t = 0; t < k; ++t) {
      for (std::size_t p = 0; p < k; ++p) {
        auto n = flat.at(t, p);
        if (n == 0) continue;
        auto a = slot[leaf_of[t]];
        auto b = slot[leaf_of[p]];
        if (a == m && b == m) continue;
        nc.counts[a * (m + 1) + b] += n;
      }
    }
    out.nodes.push_back(std::move(nc));
  }
  return out;
}

}  // namespace prism

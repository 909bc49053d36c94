#pragma once

#include <cctype>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "prism/encoding.hpp"
#include "prism/error.hpp"
#include "prism/table.hpp"

// Filter expressions over the metadata table.
//
//   expr       := or_expr
//   or_expr    := and_expr ( '||' and_expr )*
//   and_expr   := unary ( '&&' unary )*
//   unary      := '!' unary | '(' expr ')' | comparison
//   comparison := ident op literal | ident 'in' '(' literal (',' literal)* ')'
//   op         := '==' | '!=' | '<' | '<=' | '>' | '>=' | 'contains'
//   ident      := [A-Za-z_][A-Za-z0-9_]* | '`' any text without '`' '`'
//   literal    := number | '\'' chars '\''   (backslash escapes ' and \)
//
// Empty or whitespace-only text matches every row. A null cell never
// satisfies a comparison (so `!(x == 'a')` matches nulls).
namespace prism {

enum class CompareOp { eq, ne, lt, le, gt, ge, in, contains };

constexpr std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "==";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
    case CompareOp::in: return "in";
    case CompareOp::contains: return "contains";
  }
  return "?";
}

using Literal = std::variant<double, std::string>;

struct FilterNode {
  enum class Type { compare, all_of, any_of, negate };
  Type type = Type::compare;
  // compare
  std::string column;
  CompareOp op = CompareOp::eq;
  std::vector<Literal> literals;
  // all_of / any_of use lhs and rhs; negate uses lhs
  std::shared_ptr<const FilterNode> lhs;
  std::shared_ptr<const FilterNode> rhs;
};

using FilterNodePtr = std::shared_ptr<const FilterNode>;

namespace detail {

inline bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

inline void render_ident(std::string& out, std::string_view name) {
  bool plain = !name.empty() && is_ident_start(name[0]) && name != "in" && name != "contains";
  for (char c : name) plain = plain && is_ident_char(c);
  if (plain) {
    out.append(name);
  } else {
    out.push_back('`');
    out.append(name);
    out.push_back('`');
  }
}

inline void render_literal(std::string& out, const Literal& lit) {
  if (const double* d = std::get_if<double>(&lit)) {
    out += encoding::format_double(*d);
    return;
  }
  out.push_back('\'');
  for (char c : std::get<std::string>(lit)) {
    if (c == '\'' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('\'');
}

inline void render(std::string& out, const FilterNode& node) {
  switch (node.type) {
    case FilterNode::Type::compare:
      render_ident(out, node.column);
      out.push_back(' ');
      out += to_string(node.op);
      out.push_back(' ');
      if (node.op == CompareOp::in) {
        out.push_back('(');
        for (std::size_t i = 0; i < node.literals.size(); ++i) {
          if (i) out += ", ";
          render_literal(out, node.literals[i]);
        }
        out.push_back(')');
      } else {
        render_literal(out, node.literals.front());
      }
      return;
    case FilterNode::Type::all_of:
    case FilterNode::Type::any_of:
      out.push_back('(');
      render(out, *node.lhs);
      out += node.type == FilterNode::Type::all_of ? " && " : " || ";
      render(out, *node.rhs);
      out.push_back(')');
      return;
    case FilterNode::Type::negate:
      out += "!(";
      render(out, *node.lhs);
      out.push_back(')');
      return;
  }
}

class FilterParser {
 public:
  FilterParser(std::string_view text, const Schema& schema) : text_(text), schema_(schema) {}

  FilterNodePtr parse() {
    skip_ws();
    if (pos_ == text_.size()) return nullptr;
    auto node = parse_or();
    skip_ws();
    if (pos_ != text_.size()) syntax_error("'&&', '||' or end of input");
    return node;
  }

 private:
  [[noreturn]] void syntax_error(std::string_view expected) const {
    std::string found = pos_ < text_.size() ? "'" + std::string(1, text_[pos_]) + "'" : "end of input";
    fail(ErrorCode::SyntaxError,
         "at position " + std::to_string(pos_) + ": expected " + std::string(expected) + ", found " + found);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(std::string_view token) {
    skip_ws();
    if (text_.substr(pos_).starts_with(token)) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  bool accept_keyword(std::string_view word) {
    skip_ws();
    if (!text_.substr(pos_).starts_with(word)) return false;
    std::size_t end = pos_ + word.size();
    if (end < text_.size() && is_ident_char(text_[end])) return false;
    pos_ = end;
    return true;
  }

  FilterNodePtr parse_or() {
    auto lhs = parse_and();
    while (accept("||")) {
      auto rhs = parse_and();
      lhs = combine(FilterNode::Type::any_of, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  FilterNodePtr parse_and() {
    auto lhs = parse_unary();
    while (accept("&&")) {
      auto rhs = parse_unary();
      lhs = combine(FilterNode::Type::all_of, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  static FilterNodePtr combine(FilterNode::Type type, FilterNodePtr lhs, FilterNodePtr rhs) {
    auto node = std::make_shared<FilterNode>();
    node->type = type;
    node->lhs = std::move(lhs);
    node->rhs = std::move(rhs);
    return node;
  }

  FilterNodePtr parse_unary() {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '!' && !text_.substr(pos_).starts_with("!=")) {
      ++pos_;
      auto node = std::make_shared<FilterNode>();
      node->type = FilterNode::Type::negate;
      node->lhs = parse_unary();
      return node;
    }
    if (accept("(")) {
      auto inner = parse_or();
      if (!accept(")")) syntax_error("')'");
      return inner;
    }
    return parse_comparison();
  }

  std::string parse_ident() {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '`') {
      std::size_t close = text_.find('`', pos_ + 1);
      if (close == std::string_view::npos) syntax_error("closing '`'");
      std::string name(text_.substr(pos_ + 1, close - pos_ - 1));
      if (name.empty()) syntax_error("column name");
      pos_ = close + 1;
      return name;
    }
    if (pos_ >= text_.size() || !is_ident_start(text_[pos_])) syntax_error("column name, '!' or '('");
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  CompareOp parse_op() {
    skip_ws();
    // Longest match first.
    if (accept("==")) return CompareOp::eq;
    if (accept("!=")) return CompareOp::ne;
    if (accept("<=")) return CompareOp::le;
    if (accept(">=")) return CompareOp::ge;
    if (accept("<")) return CompareOp::lt;
    if (accept(">")) return CompareOp::gt;
    if (accept_keyword("in")) return CompareOp::in;
    if (accept_keyword("contains")) return CompareOp::contains;
    syntax_error("'==', '!=', '<', '<=', '>', '>=', 'in' or 'contains'");
  }

  Literal parse_literal() {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '\'') {
      ++pos_;
      std::string value;
      for (;;) {
        if (pos_ >= text_.size()) syntax_error("closing quote");
        char c = text_[pos_++];
        if (c == '\'') break;
        if (c == '\\') {
          if (pos_ >= text_.size()) syntax_error("escaped character");
          c = text_[pos_++];
        }
        value.push_back(c);
      }
      return value;
    }
    std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
            ((text_[pos_] == '-' || text_[pos_] == '+') && (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E')))) {
      ++pos_;
    }
    std::string_view token = text_.substr(start, pos_ - start);
    if (token.starts_with('+')) token.remove_prefix(1);
    auto number = encoding::parse_number(token);
    if (!number) {
      pos_ = start;
      syntax_error("number or quoted string");
    }
    return *number;
  }

  FilterNodePtr parse_comparison() {
    std::size_t column_pos = pos_;
    auto node = std::make_shared<FilterNode>();
    node->type = FilterNode::Type::compare;
    node->column = parse_ident();
    node->op = parse_op();
    if (node->op == CompareOp::in) {
      if (!accept("(")) syntax_error("'('");
      node->literals.push_back(parse_literal());
      while (accept(",")) node->literals.push_back(parse_literal());
      if (!accept(")")) syntax_error("',' or ')'");
    } else {
      node->literals.push_back(parse_literal());
    }
    check_types(*node, column_pos);
    return node;
  }

  void check_types(const FilterNode& node, std::size_t column_pos) const {
    const ColumnSpec* spec = find_spec(schema_, node.column);
    if (!spec) fail(ErrorCode::UnknownColumn, "filter references unknown column '" + node.column + "'");
    const bool numeric = spec->kind == ColumnKind::numeric;
    const std::string where = " (position " + std::to_string(column_pos) + ")";
    if (numeric && node.op == CompareOp::contains) {
      fail(ErrorCode::TypeMismatch, "'contains' on numeric column '" + node.column + "'" + where);
    }
    if (!numeric && (node.op == CompareOp::lt || node.op == CompareOp::le || node.op == CompareOp::gt ||
                     node.op == CompareOp::ge)) {
      fail(ErrorCode::TypeMismatch, "'" + std::string(to_string(node.op)) + "' on " +
                                        std::string(to_string(spec->kind)) + " column '" + node.column + "'" + where);
    }
    for (const auto& lit : node.literals) {
      if (numeric != std::holds_alternative<double>(lit)) {
        fail(ErrorCode::TypeMismatch, std::string(numeric ? "numeric" : "string") + " column '" + node.column +
                                          "' compared with a " + (numeric ? "string" : "number") + " literal" + where);
      }
    }
  }

  std::string_view text_;
  const Schema& schema_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Parsed, schema-checked filter. An empty predicate matches every row.
class FilterPredicate {
 public:
  FilterPredicate() = default;
  explicit FilterPredicate(FilterNodePtr root) : root_(std::move(root)) {}

  bool matches_all() const { return root_ == nullptr; }
  const FilterNode* root() const { return root_.get(); }

  // Canonical text: binary nodes fully parenthesized, shortest numbers.
  std::string to_string() const {
    std::string out;
    if (root_) detail::render(out, *root_);
    return out;
  }

  // One byte per row, 1 where the predicate holds.
  std::vector<std::uint8_t> evaluate(const MetadataTable& table) const {
    std::vector<std::uint8_t> mask(table.row_count(), 1);
    if (root_) eval(*root_, table, mask);
    return mask;
  }

  bool matches(const MetadataTable& table, std::size_t row) const {
    return !root_ || eval_row(*root_, table, row);
  }

  friend bool operator==(const FilterPredicate& a, const FilterPredicate& b) {
    return a.to_string() == b.to_string();
  }

 private:
  static void eval(const FilterNode& node, const MetadataTable& table, std::vector<std::uint8_t>& mask) {
    switch (node.type) {
      case FilterNode::Type::compare:
        eval_compare(node, table, mask);
        return;
      case FilterNode::Type::all_of:
      case FilterNode::Type::any_of: {
        std::vector<std::uint8_t> rhs(mask.size(), 1);
        eval(*node.lhs, table, mask);
        eval(*node.rhs, table, rhs);
        if (node.type == FilterNode::Type::all_of) {
          for (std::size_t i = 0; i < mask.size(); ++i) mask[i] &= rhs[i];
        } else {
          for (std::size_t i = 0; i < mask.size(); ++i) mask[i] |= rhs[i];
        }
        return;
      }
      case FilterNode::Type::negate:
        eval(*node.lhs, table, mask);
        for (auto& m : mask) m ^= 1;
        return;
    }
  }

  static bool compare_number(CompareOp op, double v, const std::vector<Literal>& lits) {
    switch (op) {
      case CompareOp::eq: return v == std::get<double>(lits[0]);
      case CompareOp::ne: return v != std::get<double>(lits[0]);
      case CompareOp::lt: return v < std::get<double>(lits[0]);
      case CompareOp::le: return v <= std::get<double>(lits[0]);
      case CompareOp::gt: return v > std::get<double>(lits[0]);
      case CompareOp::ge: return v >= std::get<double>(lits[0]);
      case CompareOp::in:
        for (const auto& l : lits) {
          if (v == std::get<double>(l)) return true;
        }
        return false;
      case CompareOp::contains: return false;
    }
    return false;
  }

  static void eval_compare(const FilterNode& node, const MetadataTable& table, std::vector<std::uint8_t>& mask) {
    const Column& column = table.column(node.column);
    const std::size_t n = table.row_count();
    if (column.is_numeric()) {
      const auto& values = column.numbers();
      for (std::size_t r = 0; r < n; ++r) {
        mask[r] = !std::isnan(values[r]) && compare_number(node.op, values[r], node.literals);
      }
      return;
    }
    // Resolve literals to dictionary codes once; per-row work is then integer only.
    std::vector<std::uint8_t> accepted(column.dictionary().size(), 0);
    const auto& dict = column.dictionary();
    for (std::size_t c = 0; c < dict.size(); ++c) {
      accepted[c] = string_matches(node, dict[c]);
    }
    const auto& codes = column.codes();
    for (std::size_t r = 0; r < n; ++r) {
      auto code = codes[r];
      mask[r] = code != Column::kNullCode && accepted[static_cast<std::size_t>(code)];
    }
  }

  static bool string_matches(const FilterNode& node, std::string_view v) {
    switch (node.op) {
      case CompareOp::eq: return v == std::get<std::string>(node.literals[0]);
      case CompareOp::ne: return v != std::get<std::string>(node.literals[0]);
      case CompareOp::contains: return v.find(std::get<std::string>(node.literals[0])) != std::string_view::npos;
      case CompareOp::in:
        for (const auto& l : node.literals) {
          if (v == std::get<std::string>(l)) return true;
        }
        return false;
      default: return false;
    }
  }

  static bool eval_row(const FilterNode& node, const MetadataTable& table, std::size_t row) {
    switch (node.type) {
      case FilterNode::Type::compare: {
        const Column& column = table.column(node.column);
        if (column.is_null(row)) return false;
        if (column.is_numeric()) return compare_number(node.op, column.number(row), node.literals);
        return string_matches(node, column.text(row));
      }
      case FilterNode::Type::all_of: return eval_row(*node.lhs, table, row) && eval_row(*node.rhs, table, row);
      case FilterNode::Type::any_of: return eval_row(*node.lhs, table, row) || eval_row(*node.rhs, table, row);
      case FilterNode::Type::negate: return !eval_row(*node.lhs, table, row);
    }
    return false;
  }

  FilterNodePtr root_;
};

inline FilterPredicate parse_filter(std::string_view text, const Schema& schema) {
  return FilterPredicate(detail::FilterParser(text, schema).parse());
}

}  // namespace prism

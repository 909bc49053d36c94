#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "prism/csv.hpp"
#include "prism/encoding.hpp"
#include "prism/error.hpp"

namespace prism {

enum class ColumnKind { id, categorical, numeric, text, label, prediction };

constexpr std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::id: return "id";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::text: return "text";
    case ColumnKind::label: return "label";
    case ColumnKind::prediction: return "prediction";
  }
  return "text";
}

inline std::optional<ColumnKind> parse_column_kind(std::string_view name) {
  for (auto kind : {ColumnKind::id, ColumnKind::categorical, ColumnKind::numeric, ColumnKind::text,
                    ColumnKind::label, ColumnKind::prediction}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

// Label and prediction columns hold class names and behave like categorical ones.
constexpr bool is_categorical_valued(ColumnKind kind) {
  return kind == ColumnKind::categorical || kind == ColumnKind::label ||
         kind == ColumnKind::prediction;
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::text;
  bool nullable = false;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

using Schema = std::vector<ColumnSpec>;

inline const ColumnSpec* find_spec(const Schema& schema, std::string_view name) {
  for (const auto& spec : schema) {
    if (spec.name == name) return &spec;
  }
  return nullptr;
}

// A single typed column. Numeric columns store doubles with NaN marking null;
// every other kind is dictionary encoded with code -1 marking null.
class Column {
 public:
  static constexpr std::int32_t kNullCode = -1;

  static Column numeric(ColumnSpec spec, std::vector<std::optional<double>> values) {
    Column c;
    c.spec_ = std::move(spec);
    c.size_ = values.size();
    c.numbers_.reserve(values.size());
    for (const auto& v : values) {
      if (v && !std::isfinite(*v)) fail(ErrorCode::NonFinite, "column '" + c.spec_.name + "' holds a non-finite value");
      c.numbers_.push_back(v ? *v : std::numeric_limits<double>::quiet_NaN());
    }
    c.finish();
    return c;
  }

  static Column strings(ColumnSpec spec, const std::vector<std::optional<std::string>>& values) {
    Column c;
    c.spec_ = std::move(spec);
    c.size_ = values.size();
    c.codes_.reserve(values.size());
    for (const auto& v : values) {
      c.codes_.push_back(v ? c.intern(*v) : kNullCode);
    }
    c.finish();
    return c;
  }

  const ColumnSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  ColumnKind kind() const { return spec_.kind; }
  bool is_numeric() const { return spec_.kind == ColumnKind::numeric; }
  std::size_t size() const { return size_; }
  std::size_t null_count() const { return null_count_; }

  bool is_null(std::size_t row) const {
    return is_numeric() ? std::isnan(numbers_[row]) : codes_[row] == kNullCode;
  }

  // Numeric columns only; NaN when null.
  double number(std::size_t row) const { return numbers_[row]; }

  // String-valued columns only; empty view when null.
  std::string_view text(std::size_t row) const {
    auto code = codes_[row];
    return code == kNullCode ? std::string_view{} : std::string_view(dictionary_[static_cast<std::size_t>(code)]);
  }

  std::int32_t code(std::size_t row) const { return codes_[row]; }
  const std::vector<std::int32_t>& codes() const { return codes_; }
  const std::vector<double>& numbers() const { return numbers_; }

  // Distinct non-null values in first-appearance order.
  const std::vector<std::string>& dictionary() const { return dictionary_; }

  std::optional<std::int32_t> find_code(std::string_view value) const {
    auto it = index_.find(std::string(value));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Text form used by serialization: shortest round-trip for numbers.
  std::string render(std::size_t row) const {
    if (is_null(row)) return {};
    if (is_numeric()) return encoding::format_double(numbers_[row]);
    return std::string(text(row));
  }

  friend bool operator==(const Column& a, const Column& b) {
    if (a.spec_ != b.spec_ || a.size_ != b.size_) return false;
    for (std::size_t r = 0; r < a.size_; ++r) {
      if (a.is_null(r) != b.is_null(r)) return false;
      if (a.is_null(r)) continue;
      if (a.is_numeric() ? a.number(r) != b.number(r) : a.text(r) != b.text(r)) return false;
    }
    return true;
  }

 private:
  std::int32_t intern(const std::string& value) {
    auto [it, inserted] = index_.try_emplace(value, static_cast<std::int32_t>(dictionary_.size()));
    if (inserted) dictionary_.push_back(value);
    return it->second;
  }

  void finish() {
    null_count_ = 0;
    for (std::size_t r = 0; r < size_; ++r) null_count_ += is_null(r) ? 1 : 0;
    if (null_count_ > 0) spec_.nullable = true;
  }

  ColumnSpec spec_;
  std::size_t size_ = 0;
  std::size_t null_count_ = 0;
  std::vector<double> numbers_;
  std::vector<std::int32_t> codes_;
  std::vector<std::string> dictionary_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// Columnar metadata table, one row per data instance. Immutable once built.
class MetadataTable {
 public:
  MetadataTable() = default;

  explicit MetadataTable(std::vector<Column> columns) : columns_(std::move(columns)) {
    validate_and_index();
  }

  std::size_t row_count() const { return row_count_; }
  std::size_t column_count() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }

  Schema schema() const {
    Schema out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.spec());
    return out;
  }

  const Column* find_column(std::string_view name) const {
    for (const auto& c : columns_) {
      if (c.name() == name) return &c;
    }
    return nullptr;
  }

  const Column& column(std::string_view name) const {
    if (const Column* c = find_column(name)) return *c;
    fail(ErrorCode::UnknownColumn, "no column named '" + std::string(name) + "'");
  }

  const Column& id_column() const { return columns_[id_column_]; }
  std::string_view id(std::size_t row) const { return id_column().text(row); }

  std::optional<std::size_t> row_of(std::string_view id) const {
    auto it = row_by_id_.find(std::string(id));
    if (it == row_by_id_.end()) return std::nullopt;
    return it->second;
  }

  // Maps ids to rows, failing with UnknownId on the first id not in the table.
  template <typename Range>
  std::vector<std::size_t> rows_for_ids(const Range& ids) const {
    std::vector<std::size_t> rows;
    for (const auto& id : ids) {
      auto row = row_of(id);
      if (!row) fail(ErrorCode::UnknownId, "id '" + std::string(id) + "' is not in the table");
      rows.push_back(*row);
    }
    return rows;
  }

  // Fingerprint of the row order used to align embedding files.
  std::string id_checksum() const {
    encoding::Fnv1a64 h;
    for (std::size_t r = 0; r < row_count_; ++r) h.update(id(r));
    return encoding::hex64(h.value());
  }

  friend bool operator==(const MetadataTable& a, const MetadataTable& b) {
    return a.columns_ == b.columns_;
  }

 private:
  void validate_and_index() {
    if (columns_.empty()) fail(ErrorCode::SchemaError, "table has no columns");
    row_count_ = columns_.front().size();
    std::unordered_set<std::string> names;
    std::optional<std::size_t> id_col;
    int labels = 0;
    int predictions = 0;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const auto& c = columns_[i];
      if (c.name().empty()) fail(ErrorCode::SchemaError, "column " + std::to_string(i) + " has an empty name");
      if (!names.insert(c.name()).second) fail(ErrorCode::SchemaError, "duplicate column name '" + c.name() + "'");
      if (c.size() != row_count_) {
        fail(ErrorCode::SchemaError, "column '" + c.name() + "' has " + std::to_string(c.size()) +
                                         " values, expected " + std::to_string(row_count_));
      }
      if (c.kind() == ColumnKind::id) {
        if (id_col) fail(ErrorCode::SchemaError, "more than one id column");
        id_col = i;
      }
      labels += c.kind() == ColumnKind::label;
      predictions += c.kind() == ColumnKind::prediction;
    }
    if (!id_col) fail(ErrorCode::MissingId, "no id column");
    if (labels > 1) fail(ErrorCode::SchemaError, "at most one label column is supported");
    if (predictions > 1) fail(ErrorCode::SchemaError, "at most one prediction column is supported");
    id_column_ = *id_col;
    const auto& ids = columns_[id_column_];
    row_by_id_.reserve(row_count_);
    for (std::size_t r = 0; r < row_count_; ++r) {
      if (ids.is_null(r)) fail(ErrorCode::MissingId, "row " + std::to_string(r + 1) + " has an empty id");
      if (!row_by_id_.try_emplace(std::string(ids.text(r)), r).second) {
        fail(ErrorCode::DuplicateId, "duplicate id \"" + std::string(ids.text(r)) + "\"");
      }
    }
  }

  std::vector<Column> columns_;
  std::size_t row_count_ = 0;
  std::size_t id_column_ = 0;
  std::unordered_map<std::string, std::size_t> row_by_id_;
};

struct InferenceOptions {
  double max_distinct_ratio = 0.5;
  std::size_t max_distinct = 1000;
};

using KindHints = std::map<std::string, ColumnKind>;

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline ColumnKind infer_kind(const std::vector<std::optional<std::string>>& cells,
                             const InferenceOptions& options) {
  std::size_t non_null = 0;
  bool all_numeric = true;
  std::unordered_set<std::string_view> distinct;
  for (const auto& cell : cells) {
    if (!cell) continue;
    ++non_null;
    if (all_numeric && !encoding::parse_number(*cell)) all_numeric = false;
    if (distinct.size() <= options.max_distinct) distinct.insert(*cell);
  }
  if (all_numeric) return ColumnKind::numeric;
  double ratio = static_cast<double>(distinct.size()) / static_cast<double>(non_null);
  if (ratio <= options.max_distinct_ratio && distinct.size() <= options.max_distinct) {
    return ColumnKind::categorical;
  }
  return ColumnKind::text;
}

}  // namespace detail

// Parses delimited text into a table. Kinds come from `hints` first, then from
// the column name ("id", "label", "prediction"/"pred"), then from the values:
// numeric when every non-null value parses as a finite number, categorical
// when the distinct ratio and count are under the thresholds, text otherwise.
// Without an explicit or named id column the first column is the id.
inline MetadataTable ingest_table(std::string_view source, const KindHints& hints = {},
                                  const InferenceOptions& options = {}) {
  csv::Reader reader(source);
  csv::Record header;
  if (!reader.next(header)) fail(ErrorCode::EmptySource, "source has no header row");
  const std::size_t width = header.size();
  for (const auto& [name, kind] : hints) {
    if (std::find(header.begin(), header.end(), name) == header.end()) {
      fail(ErrorCode::UnknownColumn, "kind hint for unknown column '" + name + "'");
    }
  }

  std::vector<std::vector<std::optional<std::string>>> cells(width);
  csv::Record record;
  std::size_t row = 0;
  while (reader.next(record)) {
    ++row;
    if (record.size() != width) {
      fail(ErrorCode::RaggedRow, "row " + std::to_string(row) + " (line " + std::to_string(reader.record_line()) +
                                     ") has " + std::to_string(record.size()) + " fields, header has " +
                                     std::to_string(width));
    }
    for (std::size_t c = 0; c < width; ++c) {
      if (record[c].empty()) {
        cells[c].emplace_back();
      } else {
        cells[c].emplace_back(std::move(record[c]));
      }
    }
  }
  if (row == 0) fail(ErrorCode::EmptySource, "source has a header but no data rows");

  std::vector<ColumnKind> kinds(width);
  std::vector<bool> decided(width, false);
  bool have_id = false;
  for (std::size_t c = 0; c < width; ++c) {
    if (auto it = hints.find(header[c]); it != hints.end()) {
      kinds[c] = it->second;
      decided[c] = true;
      have_id = have_id || it->second == ColumnKind::id;
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    if (decided[c]) continue;
    auto name = detail::lower(header[c]);
    if (name == "id" && !have_id) {
      kinds[c] = ColumnKind::id;
      have_id = true;
    } else if (name == "label" && !hints.contains(header[c])) {
      kinds[c] = ColumnKind::label;
    } else if (name == "prediction" || name == "pred") {
      kinds[c] = ColumnKind::prediction;
    } else {
      continue;
    }
    decided[c] = true;
  }
  if (!have_id) {
    if (decided[0]) fail(ErrorCode::MissingId, "no column is designated or inferable as id");
    kinds[0] = ColumnKind::id;
    decided[0] = true;
  }

  std::vector<Column> columns;
  columns.reserve(width);
  for (std::size_t c = 0; c < width; ++c) {
    ColumnKind kind = decided[c] ? kinds[c] : detail::infer_kind(cells[c], options);
    ColumnSpec spec{header[c], kind, false};
    if (kind == ColumnKind::numeric) {
      std::vector<std::optional<double>> values;
      values.reserve(cells[c].size());
      for (std::size_t r = 0; r < cells[c].size(); ++r) {
        const auto& cell = cells[c][r];
        if (!cell) {
          values.emplace_back();
          continue;
        }
        auto v = encoding::parse_number(*cell);
        if (!v) {
          fail(ErrorCode::TypeMismatch, "column '" + header[c] + "' is numeric but row " + std::to_string(r + 1) +
                                            " holds \"" + *cell + "\"");
        }
        values.push_back(v);
      }
      columns.push_back(Column::numeric(std::move(spec), std::move(values)));
    } else {
      columns.push_back(Column::strings(std::move(spec), cells[c]));
    }
    cells[c].clear();
    cells[c].shrink_to_fit();
  }
  return MetadataTable(std::move(columns));
}

// Hints that pin every column to the kind it has in `schema`.
inline KindHints hints_from_schema(const Schema& schema) {
  KindHints hints;
  for (const auto& spec : schema) hints[spec.name] = spec.kind;
  return hints;
}

// Serializes back to delimited text; null values become empty fields.
inline std::string write_table_csv(const MetadataTable& table) {
  std::string out;
  std::vector<std::string_view> fields;
  for (const auto& c : table.columns()) fields.push_back(c.name());
  csv::append_record(out, fields);
  std::vector<std::string> cells(table.column_count());
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    fields.clear();
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      cells[c] = table.columns()[c].render(r);
      fields.push_back(cells[c]);
    }
    csv::append_record(out, fields);
  }
  return out;
}

}  // namespace prism

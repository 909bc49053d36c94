#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "prism/csv.hpp"
#include "prism/embeddings.hpp"
#include "prism/encoding.hpp"
#include "prism/table.hpp"

namespace prism::testing {

// Directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "prism-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

using Cell = std::optional<std::string>;

// Table as plain strings, the form the oracles work from.
struct RawTable {
  std::vector<std::string> header;
  std::vector<ColumnKind> kinds;
  std::vector<std::vector<Cell>> rows;

  std::size_t col(const std::string& name) const {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  }
  const Cell& at(std::size_t row, const std::string& name) const { return rows[row][col(name)]; }

  KindHints hints() const {
    KindHints h;
    for (std::size_t c = 0; c < header.size(); ++c) h[header[c]] = kinds[c];
    return h;
  }

  std::string to_csv() const {
    std::string out;
    csv::append_record(out, std::vector<std::string_view>(header.begin(), header.end()));
    for (const auto& row : rows) {
      std::vector<std::string_view> fields;
      for (const auto& cell : row) fields.push_back(cell ? std::string_view(*cell) : std::string_view());
      csv::append_record(out, fields);
    }
    return out;
  }

  MetadataTable ingest() const { return ingest_table(to_csv(), hints()); }
};

inline const std::vector<std::string> kSplits = {"train", "test", "val"};
inline const std::vector<std::string> kGroups = {"north", "south", "east", "west", "it's", "a,b"};
inline const std::vector<std::string> kWords = {"cat", "dog", "say \"hi\"", "x,y", "alpha", "beta", "gamma", "a'b"};

// Columns: id, split, region, label, prediction, score, note. Nulls appear in
// every column but id; ids are unique but not in sorted order.
inline RawTable random_table(std::mt19937_64& rng, std::size_t rows, std::size_t classes = 4) {
  RawTable t;
  t.header = {"id", "split", "region", "label", "prediction", "score", "note"};
  t.kinds = {ColumnKind::id,         ColumnKind::categorical, ColumnKind::categorical, ColumnKind::label,
             ColumnKind::prediction, ColumnKind::numeric,     ColumnKind::text};
  std::vector<std::size_t> perm(rows);
  for (std::size_t i = 0; i < rows; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](const std::vector<std::string>& from) { return from[rng() % from.size()]; };
  auto maybe_null = [&](double p, std::string v) -> Cell {
    if (unit(rng) < p) return std::nullopt;
    return v;
  };
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<Cell> row;
    row.push_back("r" + std::to_string(perm[r] * 7 + 3));
    row.push_back(maybe_null(0.05, pick(kSplits)));
    row.push_back(maybe_null(0.1, pick(kGroups)));
    std::size_t label = rng() % classes;
    std::size_t pred = unit(rng) < 0.7 ? label : rng() % (classes + 1);
    row.push_back(maybe_null(0.03, "c" + std::to_string(label)));
    row.push_back(maybe_null(0.03, "c" + std::to_string(pred)));
    // Two decimals keep equality comparisons meaningful.
    double score = std::round((unit(rng) * 4.0 - 1.0) * 100.0) / 100.0;
    row.push_back(maybe_null(0.08, encoding::format_double(score)));
    row.push_back(maybe_null(0.1, pick(kWords) + " " + pick(kWords)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline EmbeddingMatrix random_embeddings(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v(n * d);
  for (auto& x : v) x = g(rng);
  return EmbeddingMatrix(n, d, std::move(v));
}

}  // namespace prism::testing

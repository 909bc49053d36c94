#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prism/error.hpp"
#include "prism/io.hpp"
#include "prism/table.hpp"

namespace prism {

// Dense n x d float matrix, row i aligned with table row i.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> values)
      : rows_(rows), dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) fail(ErrorCode::InvalidArgument, "embedding dimension must be at least 1");
    if (values_.size() != rows_ * dim_) {
      fail(ErrorCode::SizeMismatch, "expected " + std::to_string(rows_ * dim_) + " values, got " +
                                        std::to_string(values_.size()));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        fail(ErrorCode::NonFinite, "non-finite value at index " + std::to_string(i) + " (row " +
                                       std::to_string(i / dim_) + ", column " + std::to_string(i % dim_) + ")");
      }
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  float at(std::size_t i, std::size_t j) const { return values_[i * dim_ + j]; }
  const std::vector<float>& values() const { return values_; }

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.rows_ == b.rows_ && a.dim_ == b.dim_ &&
           std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(float)) == 0;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

// Parses raw little-endian float32 row-major bytes.
inline EmbeddingMatrix ingest_embeddings(std::string_view bytes, std::size_t n, std::size_t d) {
  if (d == 0) fail(ErrorCode::InvalidArgument, "embedding dimension must be at least 1");
  const std::size_t expected = n * d * 4;
  if (bytes.size() != expected) {
    fail(ErrorCode::SizeMismatch, "stream holds " + std::to_string(bytes.size()) + " bytes, expected " +
                                      std::to_string(expected) + " for n=" + std::to_string(n) +
                                      ", d=" + std::to_string(d));
  }
  std::vector<float> values(n * d);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t raw = 0;
    std::memcpy(&raw, bytes.data() + i * 4, 4);
    if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap32(raw);
    values[i] = std::bit_cast<float>(raw);
  }
  return EmbeddingMatrix(n, d, std::move(values));
}

inline std::string embedding_bytes(const EmbeddingMatrix& m) {
  std::string out(m.values().size() * 4, '\0');
  for (std::size_t i = 0; i < m.values().size(); ++i) {
    auto raw = std::bit_cast<std::uint32_t>(m.values()[i]);
    if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap32(raw);
    std::memcpy(out.data() + i * 4, &raw, 4);
  }
  return out;
}

// Sidecar describing a .f32 file: shape plus the checksum of the id order it
// was produced for.
struct EmbeddingMeta {
  std::size_t n = 0;
  std::size_t d = 0;
  std::string id_checksum;
};

inline std::string write_meta(const EmbeddingMeta& meta) {
  nlohmann::json j = {{"n", meta.n}, {"d", meta.d}, {"id_checksum", meta.id_checksum}};
  return j.dump() + "\n";
}

inline EmbeddingMeta parse_meta(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    EmbeddingMeta meta;
    meta.n = j.at("n").get<std::size_t>();
    meta.d = j.at("d").get<std::size_t>();
    meta.id_checksum = j.value("id_checksum", std::string{});
    return meta;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SchemaError, std::string("malformed embedding sidecar: ") + e.what());
  }
}

inline std::filesystem::path meta_path_for(const std::filesystem::path& f32_path) {
  auto p = f32_path;
  p.replace_extension(".meta");
  return p;
}

// Loads <name>.f32 with its <name>.meta sidecar. When a table is given the
// row count and id checksum must match it.
inline EmbeddingMatrix load_embeddings(const std::filesystem::path& f32_path, const MetadataTable* table = nullptr) {
  auto meta = parse_meta(io::read_file(meta_path_for(f32_path)));
  auto matrix = ingest_embeddings(io::read_file(f32_path), meta.n, meta.d);
  if (table) {
    if (meta.n != table->row_count()) {
      fail(ErrorCode::SizeMismatch, "embeddings have " + std::to_string(meta.n) + " rows, table has " +
                                        std::to_string(table->row_count()));
    }
    if (!meta.id_checksum.empty() && meta.id_checksum != table->id_checksum()) {
      fail(ErrorCode::ChecksumMismatch, "embedding id checksum " + meta.id_checksum +
                                            " does not match table id order " + table->id_checksum());
    }
  }
  return matrix;
}

inline void save_embeddings(const std::filesystem::path& f32_path, const EmbeddingMatrix& m,
                            const MetadataTable* table = nullptr) {
  io::write_file(f32_path, embedding_bytes(m));
  EmbeddingMeta meta{m.rows(), m.dim(), table ? table->id_checksum() : std::string{}};
  io::write_file(meta_path_for(f32_path), write_meta(meta));
}

}  // namespace prism

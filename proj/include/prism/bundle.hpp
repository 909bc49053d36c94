#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prism/artifacts.hpp"
#include "prism/dashboard.hpp"
#include "prism/embeddings.hpp"
#include "prism/encoding.hpp"
#include "prism/error.hpp"
#include "prism/io.hpp"
#include "prism/state.hpp"
#include "prism/table.hpp"

// Static dashboard bundles:
//
//   index.html                 UI shell, reads only relative paths
//   spec.v1                    dashboard spec
//   manifest.v1                file list with sizes and SHA-256 hashes
//   data/table.csv             metadata table
//   data/artifacts/<kind>.v1   one per computed analysis
//   data/state.token           initial state
namespace prism {

inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::string path;
  std::uint64_t bytes = 0;
  std::string sha256;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct BundleManifest {
  int version = kManifestVersion;
  int spec_version = kSpecVersion;
  std::string created;
  std::vector<ManifestEntry> files;  // sorted by path

  friend bool operator==(const BundleManifest&, const BundleManifest&) = default;
};

inline nlohmann::json manifest_json(const BundleManifest& m) {
  auto files = nlohmann::json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"bytes", f.bytes}, {"sha256", f.sha256}});
  return {{"version", m.version}, {"spec_version", m.spec_version}, {"created", m.created}, {"files", files}};
}

inline BundleManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("files") || !j["files"].is_array()) {
    fail(ErrorCode::MalformedArtifact, "manifest needs a files array");
  }
  if (j.value("version", 0) != kManifestVersion) fail(ErrorCode::UnsupportedVersion, "unsupported manifest version");
  BundleManifest m;
  m.spec_version = j.value("spec_version", 0);
  m.created = j.value("created", std::string{});
  for (const auto& f : j["files"]) {
    if (!f.is_object() || !f.contains("path") || !f["path"].is_string() || !f.contains("sha256") ||
        !f["sha256"].is_string() || !f.contains("bytes") || !f["bytes"].is_number_unsigned()) {
      fail(ErrorCode::MalformedArtifact, "manifest entries need path, bytes and sha256");
    }
    m.files.push_back({f["path"].get<std::string>(), f["bytes"].get<std::uint64_t>(), f["sha256"].get<std::string>()});
  }
  return m;
}

inline std::string utc_timestamp_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

inline constexpr std::string_view kIndexHtml = R"html(<!doctype html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Dashboard</title>
<style>
body { font-family: sans-serif; margin: 0; }
header { background: #223; color: #fff; padding: 8px 16px; }
nav button { margin-right: 4px; }
main { display: flex; flex-wrap: wrap; padding: 8px; }
section { box-sizing: border-box; padding: 8px; border: 1px solid #ccc; margin: 4px; overflow: auto; max-height: 480px; }
section.full { width: calc(100% - 8px); }
section.half { width: calc(50% - 8px); }
pre { white-space: pre-wrap; }
.error { color: #a00; padding: 16px; }
</style>
</head>
<body>
<header><h1 id="title">Dashboard</h1><nav id="pages"></nav></header>
<main id="page"></main>
<script>
"use strict";
const SUPPORTED_VERSION = 1;
async function text(path) {
  const r = await fetch(path);
  if (!r.ok) throw new Error(path + ": HTTP " + r.status);
  return r.text();
}
function fail(message) {
  document.getElementById("page").innerHTML = "";
  const div = document.createElement("div");
  div.className = "error";
  div.textContent = message;
  document.getElementById("page").appendChild(div);
}
function parseCsv(src) {
  const rows = []; let row = [], field = "", quoted = false, i = 0;
  while (i < src.length) {
    const c = src[i];
    if (quoted) {
      if (c === '"' && src[i + 1] === '"') { field += '"'; i += 2; continue; }
      if (c === '"') { quoted = false; i++; continue; }
      field += c; i++; continue;
    }
    if (c === '"') { quoted = true; i++; continue; }
    if (c === ",") { row.push(field); field = ""; i++; continue; }
    if (c === "\n" || c === "\r") {
      if (c === "\r" && src[i + 1] === "\n") i++;
      row.push(field); rows.push(row); row = []; field = ""; i++; continue;
    }
    field += c; i++;
  }
  if (field !== "" || row.length) { row.push(field); rows.push(row); }
  return rows;
}
function stateToken(baked) {
  const fragment = location.hash.replace(/^#/, "");
  return fragment || baked.trim();
}
function decodeToken(token) {
  let b64 = token.replace(/-/g, "+").replace(/_/g, "/");
  while (b64.length % 4) b64 += "=";
  return JSON.parse(atob(b64));
}
async function main() {
  const spec = JSON.parse(await text("spec.v1"));
  if (spec.version !== SUPPORTED_VERSION) {
    fail("Unsupported dashboard version " + spec.version + " (this viewer reads version " + SUPPORTED_VERSION + ").");
    return;
  }
  document.title = spec.title;
  document.getElementById("title").textContent = spec.title;
  const table = parseCsv(await text("data/table.csv"));
  let state;
  try { state = decodeToken(stateToken(await text("data/state.token"))); }
  catch (e) { fail("Invalid state token: " + e.message); return; }
  const artifacts = {};
  async function artifact(kind) {
    if (!(kind in artifacts)) {
      const a = JSON.parse(await text("data/artifacts/" + kind + ".v1"));
      if (a.version !== SUPPORTED_VERSION) throw new Error("unsupported " + kind + " artifact version " + a.version);
      artifacts[kind] = a;
    }
    return artifacts[kind];
  }
  async function showPage(index) {
    const page = spec.pages[index];
    const host = document.getElementById("page");
    host.innerHTML = "";
    for (const c of page.components) {
      const s = document.createElement("section");
      s.className = c.width;
      const h = document.createElement("h3");
      h.textContent = c.kind;
      s.appendChild(h);
      const body = document.createElement("pre");
      if (c.kind === "markdown") {
        body.textContent = c.config.source;
      } else if (c.kind === "list") {
        const start = state.page * state.page_size;
        body.textContent = table.slice(0, 1).concat(table.slice(1 + start, 1 + start + state.page_size))
          .map(r => r.join("\t")).join("\n");
      } else {
        try { body.textContent = JSON.stringify(await artifact(c.kind), null, 1); }
        catch (e) { body.textContent = e.message; }
      }
      s.appendChild(body);
      host.appendChild(s);
    }
  }
  const nav = document.getElementById("pages");
  spec.pages.forEach((p, i) => {
    const b = document.createElement("button");
    b.textContent = p.name;
    b.onclick = () => showPage(i);
    nav.appendChild(b);
  });
  if (spec.pages.length) showPage(0);
}
main().catch(e => fail(e.message));
</script>
</body>
</html>
)html";

}  // namespace detail

struct ExportOptions {
  // Pinned creation time; the current UTC time when empty.
  std::optional<std::string> timestamp;
};

// Writes the bundle layout into `out_dir` and returns its manifest. Every
// component kind in the spec must have a computed artifact.
inline BundleManifest export_bundle(const DashboardSpec& spec, const MetadataTable& table,
                                    const EmbeddingMatrix* embeddings, const ArtifactSet& artifacts,
                                    const std::filesystem::path& out_dir, const ExportOptions& options = {}) {
  for (const auto& page : spec.pages) {
    for (const auto& c : page.components) {
      auto needed = required_artifact(c.kind);
      if (needed && !artifacts.contains(*needed)) {
        fail(ErrorCode::MissingArtifact, std::string(to_string(*needed)));
      }
    }
  }
  if (embeddings && embeddings->rows() != table.row_count()) {
    fail(ErrorCode::SizeMismatch, "embeddings have " + std::to_string(embeddings->rows()) + " rows, table has " +
                                      std::to_string(table.row_count()));
  }

  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("index.html", std::string(detail::kIndexHtml));
  files.emplace_back("spec.v1", encoding::canonical_dump(spec_json(spec)) + "\n");
  files.emplace_back("data/table.csv", write_table_csv(table));
  files.emplace_back("data/state.token", encode_state(spec.initial_state) + "\n");
  for (const auto& [kind, artifact] : artifacts.items()) {
    files.emplace_back("data/artifacts/" + artifact_file_name(kind), artifact_bytes(artifact));
  }
  std::sort(files.begin(), files.end());

  BundleManifest manifest;
  manifest.created = options.timestamp ? *options.timestamp : utc_timestamp_now();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  for (const auto& [path, bytes] : files) {
    io::write_file(out_dir / path, bytes);
    manifest.files.push_back({path, bytes.size(), encoding::sha256_hex(bytes)});
  }
  io::write_file(out_dir / "manifest.v1", encoding::canonical_dump(manifest_json(manifest)) + "\n");
  return manifest;
}

// ---------------------------------------------------------------------------
// Reading and checking bundles.

struct BundleFinding {
  enum class Severity { error, warning };
  Severity severity = Severity::error;
  std::string code;  // missing_file, hash_mismatch, size_mismatch, manifest, spec, table, artifact, unknown_id, state
  std::string file;
  std::string message;
};

inline std::string_view to_string(BundleFinding::Severity s) {
  return s == BundleFinding::Severity::error ? "error" : "warning";
}

struct StaticBundle {
  DashboardSpec spec;
  MetadataTable table;
  ArtifactSet artifacts;
  std::string state_token;
};

inline std::string trim_token(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

inline DashboardSpec read_bundle_spec(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(dir / "spec.v1"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SchemaError, std::string("spec.v1 is not valid JSON: ") + e.what());
  }
  return spec_from_json(j);
}

// Loads a bundle the way a static viewer would, without checking hashes.
inline StaticBundle load_bundle(const std::filesystem::path& dir) {
  auto spec = read_bundle_spec(dir);
  auto table = ingest_table(io::read_file(dir / "data" / "table.csv"), hints_from_schema(spec.schema));
  auto artifacts = ArtifactSet::load_dir(dir / "data" / "artifacts");
  auto token = trim_token(io::read_file(dir / "data" / "state.token"));
  return StaticBundle{std::move(spec), std::move(table), std::move(artifacts), std::move(token)};
}

// Findings are empty for a consistent bundle; never throws for bundle content.
inline std::vector<BundleFinding> validate_bundle(const std::filesystem::path& dir) {
  using Severity = BundleFinding::Severity;
  std::vector<BundleFinding> findings;
  auto add = [&](std::string code, std::string file, std::string message, Severity s = Severity::error) {
    findings.push_back({s, std::move(code), std::move(file), std::move(message)});
  };
  auto exists = [&](const std::string& rel) { return std::filesystem::is_regular_file(dir / rel); };

  if (!std::filesystem::is_directory(dir)) {
    add("missing_file", dir.string(), "bundle directory does not exist");
    return findings;
  }

  std::set<std::string> listed;
  if (!exists("manifest.v1")) {
    add("missing_file", "manifest.v1", "manifest is missing");
  } else {
    try {
      auto manifest = manifest_from_json(nlohmann::json::parse(io::read_file(dir / "manifest.v1")));
      if (manifest.spec_version != kSpecVersion) {
        add("manifest", "manifest.v1", "spec version " + std::to_string(manifest.spec_version) + " is not supported");
      }
      for (const auto& f : manifest.files) {
        listed.insert(f.path);
        auto path = dir / f.path;
        if (!std::filesystem::is_regular_file(path)) {
          add("missing_file", f.path, "listed in manifest but missing");
          continue;
        }
        auto bytes = io::read_file(path);
        if (bytes.size() != f.bytes) {
          add("size_mismatch", f.path,
              "expected " + std::to_string(f.bytes) + " bytes, found " + std::to_string(bytes.size()));
        }
        if (encoding::sha256_hex(bytes) != f.sha256) add("hash_mismatch", f.path, "content hash does not match manifest");
      }
    } catch (const std::exception& e) {
      add("manifest", "manifest.v1", e.what());
    }
  }
  for (const char* required : {"index.html", "spec.v1", "data/table.csv", "data/state.token"}) {
    if (!exists(required)) {
      if (!listed.contains(required)) add("missing_file", required, "required bundle file is missing");
    } else if (!listed.empty() && !listed.contains(required)) {
      add("manifest", required, "file is not listed in the manifest", Severity::warning);
    }
  }

  std::optional<DashboardSpec> spec;
  if (exists("spec.v1")) {
    try {
      spec = read_bundle_spec(dir);
    } catch (const std::exception& e) {
      add("spec", "spec.v1", e.what());
    }
  }
  if (!spec) return findings;

  std::optional<MetadataTable> table;
  if (exists("data/table.csv")) {
    try {
      table = ingest_table(io::read_file(dir / "data" / "table.csv"), hints_from_schema(spec->schema));
      if (table->schema().size() != spec->schema.size()) {
        add("table", "data/table.csv", "table columns do not match the spec schema");
      }
    } catch (const std::exception& e) {
      add("table", "data/table.csv", e.what());
    }
  }
  if (exists("data/state.token")) {
    try {
      decode_state(trim_token(io::read_file(dir / "data" / "state.token")), spec->schema);
    } catch (const std::exception& e) {
      add("state", "data/state.token", e.what());
    }
  }

  std::set<AnalysisKind> present;
  for (auto kind : kAllAnalysisKinds) {
    std::string rel = "data/artifacts/" + artifact_file_name(kind);
    if (!exists(rel)) continue;
    present.insert(kind);
    try {
      auto artifact = ArtifactSet::parse_artifact(io::read_file(dir / rel), rel);
      if (artifact["kind"] != to_string(kind)) add("artifact", rel, "artifact kind does not match its file name");
      if (!table) continue;
      std::size_t unknown = 0;
      std::string first;
      for (const auto& id : referenced_ids(artifact)) {
        if (!table->row_of(id)) {
          if (unknown++ == 0) first = id;
        }
      }
      if (unknown) {
        add("unknown_id", rel,
            std::to_string(unknown) + " referenced id(s) not in the table, first \"" + first + "\"");
      }
    } catch (const std::exception& e) {
      add("artifact", rel, e.what());
    }
  }
  for (const auto& page : spec->pages) {
    for (const auto& c : page.components) {
      auto needed = required_artifact(c.kind);
      if (needed && !present.contains(*needed)) {
        add("missing_file", "data/artifacts/" + artifact_file_name(*needed),
            "page '" + page.name + "' shows " + std::string(to_string(c.kind)) + " but the artifact is missing");
      }
    }
  }
  return findings;
}

}  // namespace prism

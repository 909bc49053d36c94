#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prism/artifacts.hpp"
#include "prism/bundle.hpp"
#include "prism/dashboard.hpp"
#include "prism/embeddings.hpp"
#include "prism/error.hpp"
#include "prism/io.hpp"
#include "prism/service.hpp"
#include "prism/state.hpp"
#include "prism/table.hpp"

// `prism` command line: ingest, analyze, export, serve, validate.
// Exit codes: 0 success, 2 invalid input, 1 internal or I/O failure.
namespace prism::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInvalid = 2;

struct TableArgs {
  std::string table;
  std::string schema;
  std::vector<std::string> hints;  // name=kind
  std::string embeddings;
};

inline void add_table_options(CLI::App* cmd, TableArgs& a, bool embeddings = true) {
  cmd->add_option("--table", a.table, "Metadata table (CSV)")->required();
  cmd->add_option("--schema", a.schema, "Schema JSON written by `prism ingest`");
  cmd->add_option("--hint", a.hints, "Column kind override, name=kind (repeatable)");
  if (embeddings) cmd->add_option("--embeddings", a.embeddings, "Embeddings .f32 file with .meta sidecar");
}

inline KindHints parse_hints(const TableArgs& a) {
  KindHints hints;
  if (!a.schema.empty()) hints = hints_from_schema(schema_from_json(nlohmann::json::parse(io::read_file(a.schema))));
  std::vector<std::string> problems;
  for (const auto& h : a.hints) {
    auto eq = h.find('=');
    std::optional<ColumnKind> kind;
    if (eq != std::string::npos) kind = parse_column_kind(h.substr(eq + 1));
    if (!kind) {
      problems.push_back("--hint '" + h + "' is not name=kind");
      continue;
    }
    hints[h.substr(0, eq)] = *kind;
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return hints;
}

inline MetadataTable load_table(const TableArgs& a) { return ingest_table(io::read_file(a.table), parse_hints(a)); }

inline std::optional<EmbeddingMatrix> load_optional_embeddings(const TableArgs& a, const MetadataTable& table) {
  if (a.embeddings.empty()) return std::nullopt;
  return load_embeddings(a.embeddings, &table);
}

inline std::optional<std::string> column_of_kind(const MetadataTable& table, ColumnKind kind) {
  for (const auto& c : table.columns()) {
    if (c.kind() == kind) return c.name();
  }
  return std::nullopt;
}

inline nlohmann::json read_json_file(const std::string& path) {
  auto text = io::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SchemaError, path + " is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  TableArgs table;
  std::size_t dim = 0;
  std::string out;
};

inline int run_ingest(const IngestArgs& a, std::ostream& out) {
  auto table = load_table(a.table);
  std::filesystem::path dir = a.out;
  io::write_file(dir / "table.csv", write_table_csv(table));
  io::write_file(dir / "schema.json", schema_json(table.schema()).dump(2) + "\n");
  out << "rows " << table.row_count() << ", columns " << table.column_count() << ", id checksum "
      << table.id_checksum() << "\n";
  for (const auto& c : table.columns()) {
    out << "  " << c.name() << ": " << to_string(c.kind()) << (c.null_count() ? " (nullable)" : "") << "\n";
  }
  if (!a.table.embeddings.empty()) {
    std::filesystem::path src = a.table.embeddings;
    EmbeddingMatrix emb = std::filesystem::exists(meta_path_for(src))
                              ? load_embeddings(src, &table)
                              : [&] {
                                  if (a.dim == 0) fail(ErrorCode::InvalidArgument, "raw embeddings need --dim");
                                  return ingest_embeddings(io::read_file(src), table.row_count(), a.dim);
                                }();
    save_embeddings(dir / "embeddings.f32", emb, &table);
    out << "embeddings " << emb.rows() << " x " << emb.dim() << "\n";
  }
  return kExitOk;
}

struct AnalyzeArgs {
  TableArgs table;
  std::vector<std::string> kinds;
  std::string out;
  std::string label;
  std::string pred;
  std::size_t k = 5;
  double tau = 0.03;
  std::string search = "auto";
  std::size_t components = 0;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  std::string method = "pca";
  std::string hierarchy;
  std::vector<std::string> features;
  std::string positive;
  std::size_t min_size = 10;
  std::vector<std::string> columns;
  std::size_t max_bins = 10;
  std::string state;
};

inline int run_analyze(const AnalyzeArgs& a, std::ostream& out) {
  std::vector<AnalysisKind> kinds;
  std::vector<std::string> problems;
  for (const auto& name : a.kinds) {
    auto kind = parse_analysis_kind(name);
    if (!kind) {
      problems.push_back("unknown analysis kind '" + name + "'");
    } else if (std::find(kinds.begin(), kinds.end(), *kind) == kinds.end()) {
      kinds.push_back(*kind);
    }
  }
  for (auto kind : kinds) {
    if (needs_embeddings(kind) && a.table.embeddings.empty()) {
      problems.push_back("--kind " + std::string(to_string(kind)) + " needs embeddings: missing input --embeddings");
    }
    if (kind == AnalysisKind::hierarchical_confusion && a.hierarchy.empty()) {
      problems.push_back("--kind hierarchy needs a class hierarchy: missing input --hierarchy");
    }
    if (kind == AnalysisKind::subgroups && a.features.empty()) {
      problems.push_back("--kind subgroups needs --features");
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));

  auto table = load_table(a.table);
  auto emb = load_optional_embeddings(a.table, table);

  std::optional<std::vector<std::size_t>> subset;
  if (!a.state.empty()) subset = derive_view(table, decode_state(a.state, table.schema())).filtered;
  RowSubset rows;
  if (subset) rows = std::span<const std::size_t>(*subset);

  auto label = !a.label.empty() ? std::optional<std::string>(a.label) : column_of_kind(table, ColumnKind::label);
  auto pred = !a.pred.empty() ? std::optional<std::string>(a.pred) : column_of_kind(table, ColumnKind::prediction);
  auto need_label_pred = [&](AnalysisKind kind) {
    if (!label) fail(ErrorCode::InvalidArgument, std::string(to_string(kind)) + " needs --label");
    if (!pred) fail(ErrorCode::InvalidArgument, std::string(to_string(kind)) + " needs --pred");
  };

  std::filesystem::path dir = a.out;
  for (auto kind : kinds) {
    nlohmann::json artifact;
    switch (kind) {
      case AnalysisKind::summary: {
        std::vector<std::string> columns = a.columns;
        if (columns.empty()) {
          for (const auto& c : table.columns()) {
            if (c.kind() != ColumnKind::id) columns.push_back(c.name());
          }
        }
        std::vector<DistributionSummary> summaries;
        for (const auto& c : columns) summaries.push_back(column_summary(table, c, a.max_bins, rows));
        artifact = summary_json(summaries);
        break;
      }
      case AnalysisKind::duplicates: {
        DuplicateSearch search = DuplicateSearch::automatic;
        if (a.search == "exact") {
          search = DuplicateSearch::exact;
        } else if (a.search == "pivot") {
          search = DuplicateSearch::pivot;
        } else if (a.search != "auto") {
          fail(ErrorCode::InvalidArgument, "--search must be auto, exact or pivot");
        }
        artifact = duplicates_json(find_duplicates(*emb, a.k, a.tau, search), table);
        break;
      }
      case AnalysisKind::familiarity: {
        GmmOptions options;
        options.components = a.components ? a.components : default_components(emb->rows());
        options.seed = a.seed;
        options.max_iter = a.max_iter;
        auto model = fit_gmm(*emb, options);
        artifact = familiarity_json(model, familiarity_scores(model, *emb), table, a.seed);
        break;
      }
      case AnalysisKind::projection: {
        auto method = parse_projection_method(a.method);
        if (!method) fail(ErrorCode::InvalidArgument, "--method must be pca or neighbor_embed");
        artifact = projection_json(project_2d(*emb, *method, a.seed), table);
        break;
      }
      case AnalysisKind::confusion:
        need_label_pred(kind);
        artifact = confusion_json(confusion_matrix(table, *label, *pred, rows), *label, *pred);
        break;
      case AnalysisKind::hierarchical_confusion: {
        need_label_pred(kind);
        auto hierarchy = LabelHierarchy::parse(io::read_file(a.hierarchy));
        artifact = hierarchical_confusion_json(hierarchical_confusion(table, *label, *pred, hierarchy, rows), hierarchy,
                                               *label, *pred);
        break;
      }
      case AnalysisKind::subgroups: {
        need_label_pred(kind);
        SubgroupOptions options;
        options.features = a.features;
        options.label = *label;
        options.prediction = *pred;
        if (!a.positive.empty()) options.positive_class = a.positive;
        options.min_size = a.min_size;
        artifact = subgroups_json(subgroup_metrics(table, options, rows), *label, *pred);
        break;
      }
    }
    auto path = dir / artifact_file_name(kind);
    io::write_file(path, artifact_bytes(artifact));
    out << "wrote " << path.string() << "\n";
  }
  return kExitOk;
}

struct ExportArgs {
  TableArgs table;
  std::string spec;
  std::string artifacts;
  std::string out;
  std::string timestamp;
  std::string instance_base_uri;
};

inline int run_export(const ExportArgs& a, std::ostream& out) {
  auto table = load_table(a.table);
  auto emb = load_optional_embeddings(a.table, table);
  ArtifactSet artifacts;
  if (!a.artifacts.empty()) artifacts = ArtifactSet::load_dir(a.artifacts);
  DashboardSpec spec;
  if (a.spec.empty()) {
    spec = default_spec(table, artifacts);
  } else {
    auto doc = read_json_file(a.spec);
    spec = doc.contains("version") && doc.contains("schema") ? spec_from_json(doc)
                                                             : spec_from_authoring(doc, table.schema());
  }
  if (!a.instance_base_uri.empty()) spec.instance_base_uri = a.instance_base_uri;
  ExportOptions options;
  if (!a.timestamp.empty()) options.timestamp = a.timestamp;
  auto manifest = export_bundle(spec, table, emb ? &*emb : nullptr, artifacts, a.out, options);
  std::uint64_t total = 0;
  for (const auto& f : manifest.files) total += f.bytes;
  out << "exported " << manifest.files.size() << " files (" << total << " bytes) to " << a.out << "\n";
  out << "created " << manifest.created << "\n";
  for (const auto& f : manifest.files) out << "  " << f.sha256.substr(0, 12) << "  " << f.bytes << "  " << f.path << "\n";
  return kExitOk;
}

struct ServeArgs {
  TableArgs table;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string artifacts;
  std::string spec;
  std::string instance_base_uri;
  std::string uri_column;
  bool read_only = false;
};

inline int run_serve(const ServeArgs& a, std::ostream& out) {
  ServerConfig config;
  config.port = a.port;
  config.table_path = a.table.table;
  if (!a.table.schema.empty()) config.schema_path = a.table.schema;
  if (!a.table.embeddings.empty()) config.embeddings_path = a.table.embeddings;
  if (!a.artifacts.empty()) config.artifact_dir = a.artifacts;
  if (!a.spec.empty()) config.spec_path = a.spec;
  if (!a.instance_base_uri.empty()) config.instance_base_uri = a.instance_base_uri;
  if (!a.uri_column.empty()) config.uri_column = a.uri_column;
  config.read_only = a.read_only;
  auto service = make_service(config);
  HttpServer server(*service);
  server.bind(a.host, a.port);
  out << "listening on http://" << a.host << ":" << a.port << "\n" << std::flush;
  server.listen();
  return kExitOk;
}

inline int run_validate(const std::string& dir, std::ostream& out) {
  auto findings = validate_bundle(dir);
  bool errors = false;
  for (const auto& f : findings) {
    errors = errors || f.severity == BundleFinding::Severity::error;
    out << to_string(f.severity) << " " << f.code << " " << f.file << ": " << f.message << "\n";
  }
  if (findings.empty()) out << "bundle OK\n";
  return errors ? kExitInvalid : kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dataset and model analysis artifacts, dashboards and a local API", "prism"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Infer a schema and normalize a table (and embeddings)");
  add_table_options(ingest_cmd, ingest.table);
  ingest_cmd->add_option("--dim", ingest.dim, "Embedding dimension for a raw .f32 file without sidecar");
  ingest_cmd->add_option("--out", ingest.out, "Output directory")->required();

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Compute analysis artifacts");
  add_table_options(analyze_cmd, analyze.table);
  analyze_cmd
      ->add_option("--kind", analyze.kinds,
                   "summary, duplicates, familiarity, projection, confusion, hierarchy, subgroups")
      ->required()
      ->delimiter(',');
  analyze_cmd->add_option("--out", analyze.out, "Artifact directory")->required();
  analyze_cmd->add_option("--label", analyze.label, "Label column (default: the label-kind column)");
  analyze_cmd->add_option("--pred", analyze.pred, "Prediction column (default: the prediction-kind column)");
  analyze_cmd->add_option("--k", analyze.k, "Neighbors per instance for duplicates")->capture_default_str();
  analyze_cmd->add_option("--tau", analyze.tau, "Cosine distance threshold for duplicates")->capture_default_str();
  analyze_cmd->add_option("--search", analyze.search, "Duplicate search: auto, exact or pivot")->capture_default_str();
  analyze_cmd->add_option("--components", analyze.components, "Mixture components (default 8, fewer for tiny data)");
  analyze_cmd->add_option("--seed", analyze.seed, "Random seed")->capture_default_str();
  analyze_cmd->add_option("--max-iter", analyze.max_iter, "EM iteration cap")->capture_default_str();
  analyze_cmd->add_option("--method", analyze.method, "Projection: pca or neighbor_embed")->capture_default_str();
  analyze_cmd->add_option("--hierarchy", analyze.hierarchy, "Class hierarchy file (indented text or JSON)");
  analyze_cmd->add_option("--features", analyze.features, "Subgroup feature columns")->delimiter(',');
  analyze_cmd->add_option("--positive", analyze.positive, "Positive class for one-vs-rest rates");
  analyze_cmd->add_option("--min-size", analyze.min_size, "Subgroups below this size are low support")
      ->capture_default_str();
  analyze_cmd->add_option("--columns", analyze.columns, "Summary columns (default: all but id)")->delimiter(',');
  analyze_cmd->add_option("--max-bins", analyze.max_bins, "Summary bins per column")->capture_default_str();
  analyze_cmd->add_option("--state", analyze.state, "Restrict to rows passing this state token's filter");

  ExportArgs exp;
  auto* export_cmd = app.add_subcommand("export", "Write a static dashboard bundle");
  add_table_options(export_cmd, exp.table);
  export_cmd->add_option("--spec", exp.spec, "Dashboard document (default: one page with every artifact)");
  export_cmd->add_option("--artifacts", exp.artifacts, "Artifact directory from `prism analyze`");
  export_cmd->add_option("--out", exp.out, "Bundle directory")->required();
  export_cmd->add_option("--timestamp", exp.timestamp, "Pinned creation time for reproducible bundles");
  export_cmd->add_option("--instance-base-uri", exp.instance_base_uri, "Where raw instances are hosted");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  add_table_options(serve_cmd, serve.table);
  serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve.port, "Port in [1024, 65535]")->capture_default_str();
  serve_cmd->add_option("--artifacts", serve.artifacts, "Artifact directory");
  serve_cmd->add_option("--spec", serve.spec, "Dashboard document or spec.v1");
  serve_cmd->add_option("--instance-base-uri", serve.instance_base_uri, "Local directory or http(s) base for instances");
  serve_cmd->add_option("--uri-column", serve.uri_column, "Column holding each instance's path under the base");
  serve_cmd->add_flag("--read-only", serve.read_only, "Reject PUT /api/state");

  std::string bundle_dir;
  auto* validate_cmd = app.add_subcommand("validate", "Check a bundle's manifest, spec and artifacts");
  validate_cmd->add_option("bundle", bundle_dir, "Bundle directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*ingest_cmd) return run_ingest(ingest, out);
    if (*analyze_cmd) return run_analyze(analyze, out);
    if (*export_cmd) return run_export(exp, out);
    if (*serve_cmd) return run_serve(serve, out);
    if (*validate_cmd) return run_validate(bundle_dir, out);
  } catch (const ValidationError& e) {
    err << "error: " << to_string(e.code()) << "\n";
    for (const auto& p : e.problems()) err << "  " << p << "\n";
    return kExitInvalid;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_environment_error(e.code()) ? kExitInternal : kExitInvalid;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace prism::cli

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "prism/artifacts.hpp"
#include "prism/dashboard.hpp"
#include "prism/embeddings.hpp"
#include "prism/error.hpp"
#include "prism/io.hpp"
#include "prism/state.hpp"
#include "prism/table.hpp"

namespace prism {

struct ServerConfig {
  int port = 8080;
  std::filesystem::path table_path;
  std::optional<std::filesystem::path> schema_path;       // JSON schema written by `prism ingest`
  std::optional<std::filesystem::path> embeddings_path;   // .f32 with .meta sidecar
  std::optional<std::string> instance_base_uri;
  std::optional<std::filesystem::path> artifact_dir;
  std::optional<std::filesystem::path> spec_path;         // spec.v1 or authoring document
  std::optional<std::string> uri_column;                  // per-row instance path, relative to the base URI
  bool read_only = false;
};

// Throws ValidationErrors listing every problem with the config.
inline void validate_config(const ServerConfig& config) {
  std::vector<std::string> problems;
  if (config.port < 1024 || config.port > 65535) {
    problems.push_back("port " + std::to_string(config.port) + " is outside [1024, 65535]");
  }
  auto check = [&](const std::optional<std::filesystem::path>& p, const char* what, bool dir) {
    if (!p) return;
    bool ok = dir ? std::filesystem::is_directory(*p) : std::filesystem::is_regular_file(*p);
    if (!ok) problems.push_back(std::string(what) + " " + p->string() + " does not exist");
  };
  check(config.table_path, "table", false);
  check(config.schema_path, "schema", false);
  check(config.embeddings_path, "embeddings", false);
  check(config.artifact_dir, "artifact directory", true);
  check(config.spec_path, "spec", false);
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

struct ApiRequest {
  std::string method = "GET";
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json; charset=utf-8";
  std::string body;
  std::optional<std::string> location;  // redirects
  std::optional<std::filesystem::path> file;  // local instance bytes
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownId:
    case ErrorCode::MissingArtifact: return 404;
    case ErrorCode::IoError:
    case ErrorCode::Internal:
    case ErrorCode::PortInUse: return 500;
    default: return 400;
  }
}

inline ApiResponse json_response(const nlohmann::json& j, int status = 200) {
  ApiResponse r;
  r.status = status;
  r.body = encoding::canonical_dump(j);
  return r;
}

inline ApiResponse error_response(ErrorCode code, const std::string& message, int status) {
  return json_response({{"error", to_string(code)}, {"message", message}}, status);
}

inline ApiResponse error_response(const Error& e) {
  return error_response(e.code(), e.detail(), http_status(e.code()));
}

// A spec showing a list plus one component per available artifact.
inline DashboardSpec default_spec(const MetadataTable& table, const ArtifactSet& artifacts) {
  std::vector<ComponentInstance> components{{ComponentKind::list, nlohmann::json::object(), WidthHint::full}};
  for (const auto& [kind, artifact] : artifacts.items()) {
    nlohmann::json config = nlohmann::json::object();
    switch (kind) {
      case AnalysisKind::summary:
        config["columns"] = nlohmann::json::array();
        for (const auto& c : artifact.value("columns", nlohmann::json::array())) config["columns"].push_back(c["column"]);
        break;
      case AnalysisKind::confusion:
      case AnalysisKind::hierarchical_confusion:
        config["label"] = artifact["label"];
        config["prediction"] = artifact["prediction"];
        break;
      case AnalysisKind::subgroups:
        config["label"] = artifact["label"];
        config["prediction"] = artifact["prediction"];
        config["features"] = artifact["features"];
        break;
      default:
        break;
    }
    ComponentKind ck = *parse_component_kind(to_string(kind));
    components.push_back({ck, std::move(config), WidthHint::half});
  }
  std::vector<std::size_t> all(components.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return build_spec("Dashboard", components, {{"Overview", all}}, AnalysisState{}, table.schema());
}

// Request handling independent of the transport. Reads share a snapshot;
// state replacement is serialized.
class ApiService {
 public:
  ApiService(DashboardSpec spec, MetadataTable table, ArtifactSet artifacts, std::optional<std::string> instance_base_uri,
             std::optional<std::string> uri_column = std::nullopt, bool read_only = false)
      : spec_(std::move(spec)),
        table_(std::move(table)),
        artifacts_(std::move(artifacts)),
        base_uri_(std::move(instance_base_uri)),
        uri_column_(std::move(uri_column)),
        read_only_(read_only),
        schema_(table_.schema()),
        token_(encode_state(spec_.initial_state)) {
    if (!base_uri_) base_uri_ = spec_.instance_base_uri;
    if (uri_column_) table_.column(*uri_column_);
  }

  const MetadataTable& table() const { return table_; }
  const DashboardSpec& spec() const { return spec_; }
  bool read_only() const { return read_only_; }

  std::string current_token() const {
    std::shared_lock lock(mutex_);
    return token_;
  }

  ApiResponse handle(const ApiRequest& req) const {
    try {
      return route(req);
    } catch (const Error& e) {
      return error_response(e);
    } catch (const std::exception& e) {
      return error_response(ErrorCode::Internal, e.what(), 500);
    }
  }

  // The only mutator.
  ApiResponse put_state(std::string_view body) const {
    if (read_only_) return error_response(ErrorCode::InvalidState, "service is read-only", 403);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return error_response(ErrorCode::MalformedToken, "body must be {\"token\": \"...\"}", 400);
    }
    if (!j.is_object() || !j.contains("token") || !j["token"].is_string()) {
      return error_response(ErrorCode::MalformedToken, "body must be {\"token\": \"...\"}", 400);
    }
    auto state = decode_state(j["token"].get<std::string>(), schema_);
    auto canonical = encode_state(state);
    std::unique_lock lock(mutex_);
    token_ = canonical;
    return json_response({{"token", canonical}});
  }

 private:
  AnalysisState state_for(const ApiRequest& req) const {
    auto it = req.query.find("state");
    if (it != req.query.end()) return decode_state(it->second, schema_);
    return decode_state(current_token(), schema_);
  }

  static std::size_t parse_index(const std::string& text, const char* what) {
    auto v = encoding::parse_number(text);
    if (!v || *v < 0 || *v != static_cast<double>(static_cast<std::size_t>(*v))) {
      fail(ErrorCode::InvalidArgument, std::string(what) + " must be a non-negative integer");
    }
    return static_cast<std::size_t>(*v);
  }

  ApiResponse route(const ApiRequest& req) const {
    const std::string& p = req.path;
    if (p == "/api/state") {
      if (req.method == "PUT") return put_state(req.body);
      if (req.method == "GET") return json_response({{"token", current_token()}});
      return error_response(ErrorCode::InvalidArgument, "method not allowed", 405);
    }
    if (req.method != "GET") return error_response(ErrorCode::InvalidArgument, "method not allowed", 405);
    if (p == "/api/spec") return json_response(spec_json(spec_));
    if (p == "/api/schema") return json_response(schema_json(schema_));
    if (p == "/api/view") {
      auto state = state_for(req);
      return json_response(view_payload(table_, derive_view(table_, state)));
    }
    if (p == "/api/table") return table_page(req);
    constexpr std::string_view artifact_prefix = "/api/artifact/";
    if (p.starts_with(artifact_prefix)) {
      auto name = p.substr(artifact_prefix.size());
      auto kind = parse_analysis_kind(name);
      if (!kind) return error_response(ErrorCode::InvalidArgument, "unknown analysis kind '" + name + "'", 404);
      const auto* artifact = artifacts_.find(*kind);
      if (!artifact) fail(ErrorCode::MissingArtifact, std::string(to_string(*kind)));
      ApiResponse r;
      r.body = artifact_bytes(*artifact);
      return r;
    }
    constexpr std::string_view instance_prefix = "/instances/";
    if (p.starts_with(instance_prefix)) return instance(p.substr(instance_prefix.size()));
    return error_response(ErrorCode::InvalidArgument, "no route for " + p, 404);
  }

  ApiResponse table_page(const ApiRequest& req) const {
    auto state = state_for(req);
    if (auto it = req.query.find("page"); it != req.query.end()) state.page = parse_index(it->second, "page");
    auto view = derive_view(table_, state);
    nlohmann::json j;
    j["columns"] = nlohmann::json::array();
    for (const auto& c : table_.columns()) j["columns"].push_back(c.name());
    j["rows"] = nlohmann::json::array();
    for (auto r : view.page) {
      auto row = nlohmann::json::array();
      for (const auto& c : table_.columns()) {
        if (c.is_null(r)) {
          row.push_back(nullptr);
        } else if (c.is_numeric()) {
          row.push_back(c.number(r));
        } else {
          row.push_back(std::string(c.text(r)));
        }
      }
      j["rows"].push_back(std::move(row));
    }
    j["page"] = view.page_index;
    j["page_size"] = view.page_size;
    j["total"] = view.filtered.size();
    j["total_pages"] = view.total_pages();
    return json_response(j);
  }

  ApiResponse instance(const std::string& id) const {
    auto row = table_.row_of(id);
    if (!row) fail(ErrorCode::UnknownId, "unknown id \"" + id + "\"");
    if (!base_uri_) fail(ErrorCode::MissingArtifact, "no instance_base_uri configured");
    std::string name = id;
    if (uri_column_) {
      const auto& col = table_.column(*uri_column_);
      if (col.is_null(*row)) fail(ErrorCode::UnknownId, "instance \"" + id + "\" has no uri");
      name = col.render(*row);
    }
    const std::string& base = *base_uri_;
    if (base.starts_with("http://") || base.starts_with("https://")) {
      ApiResponse r;
      r.status = 302;
      r.location = base + (base.ends_with('/') ? "" : "/") + name;
      r.content_type = "text/plain";
      return r;
    }
    std::filesystem::path root = base.starts_with("file://") ? base.substr(7) : base;
    auto path = (root / name).lexically_normal();
    auto rel = path.lexically_relative(root.lexically_normal());
    if (rel.empty() || *rel.begin() == "..") fail(ErrorCode::UnknownId, "instance path escapes the base directory");
    if (!std::filesystem::is_regular_file(path)) fail(ErrorCode::UnknownId, "no instance file for \"" + id + "\"");
    ApiResponse r;
    r.file = path;
    r.content_type = content_type_for(path);
    return r;
  }

  static std::string content_type_for(const std::filesystem::path& p) {
    static const std::map<std::string, std::string> types = {
        {".png", "image/png"},   {".jpg", "image/jpeg"}, {".jpeg", "image/jpeg"}, {".gif", "image/gif"},
        {".webp", "image/webp"}, {".wav", "audio/wav"},  {".mp3", "audio/mpeg"},  {".txt", "text/plain"},
    };
    auto it = types.find(p.extension().string());
    return it == types.end() ? "application/octet-stream" : it->second;
  }

  DashboardSpec spec_;
  MetadataTable table_;
  ArtifactSet artifacts_;
  std::optional<std::string> base_uri_;
  std::optional<std::string> uri_column_;
  bool read_only_;
  Schema schema_;
  mutable std::shared_mutex mutex_;
  mutable std::string token_;
};

// Loads everything named by the config.
inline std::unique_ptr<ApiService> make_service(const ServerConfig& config) {
  validate_config(config);
  KindHints hints;
  std::optional<nlohmann::json> spec_doc;
  if (config.spec_path) spec_doc = nlohmann::json::parse(io::read_file(*config.spec_path));
  bool full_spec = spec_doc && spec_doc->contains("version") && spec_doc->contains("schema");
  if (config.schema_path) {
    hints = hints_from_schema(schema_from_json(nlohmann::json::parse(io::read_file(*config.schema_path))));
  } else if (full_spec) {
    hints = hints_from_schema(schema_from_json((*spec_doc)["schema"]));
  }
  auto table = ingest_table(io::read_file(config.table_path), hints);
  if (config.embeddings_path) load_embeddings(*config.embeddings_path, &table);
  ArtifactSet artifacts;
  if (config.artifact_dir) artifacts = ArtifactSet::load_dir(*config.artifact_dir);
  DashboardSpec spec;
  if (!spec_doc) {
    spec = default_spec(table, artifacts);
  } else if (full_spec) {
    spec = spec_from_json(*spec_doc);
  } else {
    spec = spec_from_authoring(*spec_doc, table.schema());
  }
  auto base = config.instance_base_uri ? config.instance_base_uri : spec.instance_base_uri;
  return std::make_unique<ApiService>(std::move(spec), std::move(table), std::move(artifacts), base, config.uri_column,
                                      config.read_only);
}

// cpp-httplib transport around ApiService.
class HttpServer {
 public:
  explicit HttpServer(const ApiService& service) : service_(service) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) { dispatch(req, res); };
    server_.Get(R"(/.*)", handler);
    server_.Put(R"(/.*)", handler);
    server_.Post(R"(/.*)", handler);
    server_.Delete(R"(/.*)", handler);
    // The library default also sets SO_REUSEPORT, which would let a second
    // server share a busy port instead of failing.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
  }
  ~HttpServer() { stop(); }

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  void bind(const std::string& host, int port) {
    if (!server_.bind_to_port(host, port)) {
      fail(ErrorCode::PortInUse, "cannot bind " + host + ":" + std::to_string(port));
    }
    port_ = port;
  }

  int bind_any(const std::string& host = "127.0.0.1") {
    int port = server_.bind_to_any_port(host);
    if (port < 0) fail(ErrorCode::PortInUse, "cannot bind any port on " + host);
    port_ = port;
    return port;
  }

  int port() const { return port_; }

  // Blocks until stop().
  void listen() { server_.listen_after_bind(); }

  void start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  void dispatch(const httplib::Request& req, httplib::Response& res) const {
    ApiRequest api;
    api.method = req.method;
    api.path = req.path;
    for (const auto& [k, v] : req.params) api.query.emplace(k, v);
    api.body = req.body;
    auto out = service_.handle(api);
    res.status = out.status;
    if (out.location) {
      res.set_redirect(*out.location, out.status);
      return;
    }
    if (out.file) {
      res.set_content(io::read_file(*out.file), out.content_type);
      return;
    }
    res.set_content(out.body, out.content_type);
  }

  const ApiService& service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace prism

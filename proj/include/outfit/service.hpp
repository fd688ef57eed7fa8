#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "outfit/generation.hpp"
#include "outfit/training.hpp"

namespace httplib {
class Server;
}

namespace outfit {

struct ServiceConfig {
  std::filesystem::path data_root;
  /// One JSON snapshot per session when set; reloaded on start.
  std::optional<std::filesystem::path> persist_dir;
  /// Static assets mounted at / when set.
  std::optional<std::filesystem::path> static_dir;
  GenerationConfig defaults;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Composer sessions over one immutable model and catalog. Every method is
/// safe to call concurrently; mutations of one session are serialized.
class ComposerService {
 public:
  ComposerService(std::shared_ptr<const Model> model, ItemTable catalog, ServiceConfig config);

  ApiResponse create_session(const nlohmann::json& request);
  ApiResponse get_session(const std::string& id) const;
  ApiResponse delete_session(const std::string& id);
  ApiResponse step_session(const std::string& id, const nlohmann::json& request);
  ApiResponse search_items(const std::string& text, const std::optional<std::string>& type, int limit) const;
  ApiResponse get_item(const std::string& id) const;
  /// Raw image bytes and content type; nullopt when unknown.
  std::optional<std::pair<std::string, std::string>> item_image(const std::string& id) const;
  ApiResponse health() const;

  const EncodedItems& encoded() const { return encoded_; }
  const CandidatePools& pools() const { return pools_; }
  const Model& model() const { return *model_; }
  std::size_t session_count() const;

 private:
  struct Session {
    mutable std::mutex mutex;
    std::string id;
    std::string query;
    Vector q;
    PartialOutfit start;
    PartialOutfit partial;
    GenerationConfig config;
    std::vector<TraceStep> trace;
    long version = 1;
    std::string created_at;
    std::string updated_at;
  };

  nlohmann::json session_json(const Session& s) const;
  nlohmann::json item_summary(const std::string& id) const;
  std::shared_ptr<Session> find(const std::string& id) const;
  void persist(const Session& s) const;
  void restore_persisted();

  std::shared_ptr<const Model> model_;
  ItemTable catalog_;
  ServiceConfig config_;
  EncodedItems encoded_;
  CandidatePools pools_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// Maps an error to {status, {code, message, details}}.
ApiResponse error_response(const std::exception& e);

/// Registers the /v1 routes (and the static mount, if configured).
void bind_routes(httplib::Server& server, ComposerService& service);

/// Loads every split under `root` into one item table.
ItemTable load_catalog(const std::filesystem::path& root, const std::vector<std::string>& vocabulary, int resolution);

}  // namespace outfit

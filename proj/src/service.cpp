#include "outfit/service.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include <httplib.h>

#include "outfit/error.hpp"
#include "outfit/kernels.hpp"

namespace outfit {

using nlohmann::json;

namespace {

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return 400;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kConflict: return 409;
    case ErrorKind::kInvalidQuery:
    case ErrorKind::kVocabulary:
    case ErrorKind::kConfig:
    case ErrorKind::kPool:
    case ErrorKind::kModality:
      return 422;
    default: return 500;
  }
}

std::string now_iso() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_session_id() {
  static std::mutex m;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(m);
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
  return buf;
}

ApiResponse error_body(int status, const std::string& code, const std::string& message,
                       const std::vector<std::string>& details = {}) {
  return {status, {{"code", code}, {"message", message}, {"details", details}}};
}

}  // namespace

ApiResponse error_response(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return error_body(http_status(err->kind()), std::string(error_code(err->kind())), err->what(), err->details());
  }
  if (dynamic_cast<const json::exception*>(&e) != nullptr) return error_body(400, "bad_request", e.what());
  return error_body(500, "internal", e.what());
}

ItemTable load_catalog(const std::filesystem::path& root, const std::vector<std::string>& vocabulary, int resolution) {
  ItemTable table;
  LoadOptions options;
  options.resolution = resolution;
  if (!vocabulary.empty()) options.vocabulary = vocabulary;
  for (SplitName split : {SplitName::kTrain, SplitName::kValid, SplitName::kTest}) {
    DatasetSplit s = load_dataset(root, split, options);
    for (const auto& item : s.items) {
      if (table.find(item.item_id) == nullptr) table.add(item);
    }
  }
  return table;
}

ComposerService::ComposerService(std::shared_ptr<const Model> model, ItemTable catalog, ServiceConfig config)
    : model_(std::move(model)), catalog_(std::move(catalog)), config_(std::move(config)) {
  encoded_ = model_->encode(catalog_);
  pools_ = pools_by_type(encoded_);
  if (config_.persist_dir) {
    std::filesystem::create_directories(*config_.persist_dir);
    restore_persisted();
  }
}

std::size_t ComposerService::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

json ComposerService::item_summary(const std::string& id) const {
  const FashionItem& it = catalog_.at(id);
  return {{"item_id", it.item_id},
          {"title", it.title},
          {"description", it.description},
          {"semantic_type", it.semantic_type},
          {"fine_category", it.fine_category},
          {"image_url", "/v1/items/" + it.item_id + "/image"}};
}

json ComposerService::session_json(const Session& s) const {
  json filled = json::object();
  for (const auto& [slot, id] : s.partial.filled) filled[slot] = item_summary(id);
  json trace = json::array();
  for (const auto& step : s.trace) trace.push_back(to_json(step));
  json j = {{"session_id", s.id},
            {"version", s.version},
            {"query", s.query},
            {"slots", s.partial.slots},
            {"filled", filled},
            {"locked", s.partial.locked},
            {"start", to_json(s.start)},
            {"config",
             {{"k", s.config.k},
              {"sampling", std::string(to_string(s.config.sampling))},
              {"compat_mode", std::string(to_string(s.config.compat_mode))},
              {"seed", s.config.seed}}},
            {"trace", trace},
            {"complete", s.partial.complete()},
            {"created_at", s.created_at},
            {"updated_at", s.updated_at}};
  if (s.partial.complete()) {
    j["next_slot"] = nullptr;
    j["candidates"] = json::array();
  } else {
    const GenerationContext ctx{*model_, encoded_, pools_};
    const auto slot = select_next_slot(s.partial, s.q, encoded_, pools_);
    const auto ranked = rank_candidates(s.partial, s.q, *slot, ctx, s.config.compat_mode);
    json cands = json::array();
    for (std::size_t i = 0; i < std::min(kTraceDepth, ranked.size()); ++i) {
      json c = to_json(ranked[i]);
      c["item"] = item_summary(ranked[i].item_id);
      cands.push_back(std::move(c));
    }
    j["next_slot"] = *slot;
    j["candidates"] = cands;
    j["candidate_count"] = ranked.size();
  }
  return j;
}

std::shared_ptr<ComposerService::Session> ComposerService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorKind::kNotFound, "no session " + id, {id});
  return it->second;
}

void ComposerService::persist(const Session& s) const {
  if (!config_.persist_dir) return;
  json j = {{"session_id", s.id},       {"query", s.query},        {"start", to_json(s.start)},
            {"partial", to_json(s.partial)}, {"version", s.version}, {"created_at", s.created_at},
            {"updated_at", s.updated_at},
            {"config",
             {{"k", s.config.k},
              {"sampling", std::string(to_string(s.config.sampling))},
              {"compat_mode", std::string(to_string(s.config.compat_mode))},
              {"seed", s.config.seed}}}};
  json trace = json::array();
  for (const auto& step : s.trace) trace.push_back(to_json(step));
  j["trace"] = trace;
  const auto path = *config_.persist_dir / (s.id + ".json");
  const auto tmp = path.string() + ".tmp";
  std::ofstream(tmp) << j.dump() << '\n';
  std::filesystem::rename(tmp, path);
}

void ComposerService::restore_persisted() {
  for (const auto& entry : std::filesystem::directory_iterator(*config_.persist_dir)) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) continue;
    auto s = std::make_shared<Session>();
    s->id = j.at("session_id");
    s->query = j.at("query");
    s->q = model_->embed_query(s->query);
    s->start = partial_outfit_from_json(j.at("start"));
    s->partial = partial_outfit_from_json(j.at("partial"));
    s->version = j.at("version");
    s->created_at = j.at("created_at");
    s->updated_at = j.at("updated_at");
    const json& c = j.at("config");
    s->config = {c.at("k").get<int>(), parse_sampling(c.at("sampling").get<std::string>()),
                 parse_compat_mode(c.at("compat_mode").get<std::string>()), c.at("seed").get<std::uint64_t>()};
    for (const auto& step : j.at("trace")) s->trace.push_back(trace_step_from_json(step));
    sessions_[s->id] = s;
  }
}

ApiResponse ComposerService::create_session(const json& req) try {
  auto s = std::make_shared<Session>();
  s->query = req.value("query_text", "");
  s->q = model_->embed_query(s->query);
  s->config = config_.defaults;
  if (req.contains("k")) s->config.k = req.at("k").get<int>();
  if (req.contains("sampling")) s->config.sampling = parse_sampling(req.at("sampling").get<std::string>());
  if (req.contains("compat_mode")) s->config.compat_mode = parse_compat_mode(req.at("compat_mode").get<std::string>());
  if (req.contains("seed")) s->config.seed = req.at("seed").get<std::uint64_t>();
  if (s->config.k < 1) throw Error(ErrorKind::kConfig, "k must be at least 1");

  if (!req.contains("slots") || !req.at("slots").is_array() || req.at("slots").empty()) {
    throw Error(ErrorKind::kConfig, "slots must be a non-empty list of types");
  }
  s->start.slots = req.at("slots").get<std::vector<std::string>>();
  for (const auto& slot : s->start.slots) {
    if (!pools_.contains(slot)) throw Error(ErrorKind::kVocabulary, "unknown type '" + slot + "'", {slot});
  }
  for (const auto& id : req.value("starting_items", std::vector<std::string>{})) {
    const FashionItem* item = catalog_.find(id);
    if (item == nullptr) throw Error(ErrorKind::kConfig, "unknown starting item " + id, {id});
    const auto& type = item->semantic_type;
    if (std::find(s->start.slots.begin(), s->start.slots.end(), type) == s->start.slots.end()) {
      throw Error(ErrorKind::kConfig, "starting item " + id + " has type '" + type + "', which is not a slot", {id, type});
    }
    if (s->start.filled.contains(type)) throw Error(ErrorKind::kConfig, "two starting items fill '" + type + "'", {type});
    s->start.filled[type] = id;
    s->start.locked.insert(type);
  }
  s->start.validate();
  s->partial = s->start;
  s->id = new_session_id();
  s->created_at = s->updated_at = now_iso();
  json body = session_json(*s);
  {
    std::unique_lock lock(sessions_mutex_);
    sessions_[s->id] = s;
  }
  persist(*s);
  return {201, std::move(body)};
} catch (const std::exception& e) {
  return error_response(e);
}

ApiResponse ComposerService::get_session(const std::string& id) const try {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return {200, session_json(*s)};
} catch (const std::exception& e) {
  return error_response(e);
}

ApiResponse ComposerService::delete_session(const std::string& id) try {
  {
    std::unique_lock lock(sessions_mutex_);
    if (sessions_.erase(id) == 0) throw Error(ErrorKind::kNotFound, "no session " + id, {id});
  }
  if (config_.persist_dir) std::filesystem::remove(*config_.persist_dir / (id + ".json"));
  return {200, {{"deleted", id}}};
} catch (const std::exception& e) {
  return error_response(e);
}

ApiResponse ComposerService::step_session(const std::string& id, const json& req) try {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (!req.contains("expected_version")) throw Error(ErrorKind::kUsage, "expected_version is required");
  const long expected = req.at("expected_version").get<long>();
  if (expected != s->version) {
    return error_body(409, "version_conflict",
                      "session is at version " + std::to_string(s->version) + ", request expected " +
                          std::to_string(expected),
                      {std::to_string(s->version)});
  }
  const std::string action = req.value("action", "");
  const GenerationContext ctx{*model_, encoded_, pools_};
  if (action == "auto" || action == "choose") {
    if (s->partial.complete()) return error_body(409, "complete", "every slot is already filled");
    if (action == "auto") {
      s->trace.push_back(auto_step(s->partial, s->q, ctx, s->config, s->trace.size()));
    } else {
      const std::string item = req.at("item_id").get<std::string>();
      std::string slot;
      if (req.contains("slot")) {
        slot = req.at("slot").get<std::string>();
        const auto open = s->partial.unfilled();
        if (std::find(open.begin(), open.end(), slot) == open.end()) {
          throw Error(ErrorKind::kConfig, "slot '" + slot + "' is not an open slot", {slot});
        }
      } else {
        slot = *select_next_slot(s->partial, s->q, encoded_, pools_);
      }
      const auto ranked = rank_candidates(s->partial, s->q, slot, ctx, s->config.compat_mode);
      auto it = std::find_if(ranked.begin(), ranked.end(), [&](const RankedCandidate& c) { return c.item_id == item; });
      if (it == ranked.end()) {
        return error_body(422, "not_a_candidate", "item " + item + " is not a candidate for slot '" + slot + "'",
                          {item, slot});
      }
      TraceStep step;
      step.type = slot;
      step.chosen = item;
      step.sampling = s->config.sampling;
      step.user_choice = true;
      step.top.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(kTraceDepth, ranked.size())));
      s->partial.filled[slot] = item;
      s->trace.push_back(std::move(step));
    }
  } else if (action == "undo") {
    if (s->trace.empty()) return error_body(409, "nothing_to_undo", "no generated step to undo");
    const std::string slot = s->trace.back().type;
    if (s->partial.locked.contains(slot)) {
      return error_body(409, "locked", "the last filled slot '" + slot + "' is locked", {slot});
    }
    s->partial.filled.erase(slot);
    s->trace.pop_back();
  } else if (action == "lock" || action == "unlock") {
    const std::string slot = req.at("slot").get<std::string>();
    if (!s->partial.filled.contains(slot)) throw Error(ErrorKind::kConfig, "slot '" + slot + "' is not filled", {slot});
    if (action == "lock") {
      s->partial.locked.insert(slot);
    } else {
      s->partial.locked.erase(slot);
    }
  } else {
    throw Error(ErrorKind::kUsage, "unknown action '" + action + "'", {action});
  }
  ++s->version;
  s->updated_at = now_iso();
  persist(*s);
  return {200, session_json(*s)};
} catch (const std::exception& e) {
  return error_response(e);
}

ApiResponse ComposerService::search_items(const std::string& text, const std::optional<std::string>& type,
                                          int limit) const try {
  if (limit < 1) throw Error(ErrorKind::kConfig, "limit must be at least 1");
  const Vector q = model_->embed_query(text);
  std::vector<Eigen::Index> cols;
  if (type) {
    auto it = pools_.find(*type);
    if (it == pools_.end()) throw Error(ErrorKind::kVocabulary, "unknown type '" + *type + "'", {*type});
    cols = it->second;
  } else {
    for (Eigen::Index i = 0; i < encoded_.size(); ++i) cols.push_back(i);
  }
  Batch pts(encoded_.u_image.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) pts.col(static_cast<Eigen::Index>(k)) = encoded_.embedding(cols[k]);
  const Vector d = kernels::column_distances(pts, q);
  std::vector<std::size_t> order(cols.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = d[static_cast<Eigen::Index>(a)], db = d[static_cast<Eigen::Index>(b)];
    if (da != db) return da < db;
    return encoded_.ids[static_cast<std::size_t>(cols[a])] < encoded_.ids[static_cast<std::size_t>(cols[b])];
  });
  json results = json::array();
  for (std::size_t i = 0; i < order.size() && static_cast<int>(i) < limit; ++i) {
    const auto& id = encoded_.ids[static_cast<std::size_t>(cols[order[i]])];
    json r = item_summary(id);
    r["distance"] = d[static_cast<Eigen::Index>(order[i])];
    results.push_back(std::move(r));
  }
  return {200, {{"query", text}, {"results", results}}};
} catch (const std::exception& e) {
  return error_response(e);
}

ApiResponse ComposerService::get_item(const std::string& id) const try {
  return {200, item_summary(id)};
} catch (const std::exception& e) {
  return error_response(e);
}

std::optional<std::pair<std::string, std::string>> ComposerService::item_image(const std::string& id) const {
  const FashionItem* item = catalog_.find(id);
  if (item == nullptr) return std::nullopt;
  const auto path = config_.data_root / item->image_path;
  if (!item->image_path.empty() && std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return std::make_pair(std::move(bytes), ext == ".png" ? "image/png" : "image/jpeg");
  }
  if (item->image.data.empty()) return std::nullopt;
  const auto png = encode_png(item->image);
  return std::make_pair(std::string(png.begin(), png.end()), std::string("image/png"));
}

ApiResponse ComposerService::health() const {
  return {200,
          {{"status", "ok"},
           {"api", "v1"},
           {"items", encoded_.size()},
           {"types", [&] {
              std::vector<std::string> t;
              for (const auto& [k, v] : pools_) t.push_back(k);
              return t;
            }()},
           {"sessions", session_count()},
           {"d_e", model_->config().embed_dim}}};
}

void bind_routes(httplib::Server& server, ComposerService& service) {
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  };
  server.Post("/v1/sessions", [&, reply, parse](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, service.create_session(parse(req)));
    } catch (const std::exception& e) {
      reply(res, error_response(e));
    }
  });
  server.Get(R"(/v1/sessions/([^/]+))", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.get_session(req.matches[1]));
  });
  server.Delete(R"(/v1/sessions/([^/]+))", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.delete_session(req.matches[1]));
  });
  server.Post(R"(/v1/sessions/([^/]+)/step)", [&, reply, parse](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, service.step_session(req.matches[1], parse(req)));
    } catch (const std::exception& e) {
      reply(res, error_response(e));
    }
  });
  server.Get("/v1/items/search", [&, reply](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> type;
    if (req.has_param("type") && !req.get_param_value("type").empty()) type = req.get_param_value("type");
    int limit = 20;
    try {
      if (req.has_param("limit")) limit = std::stoi(req.get_param_value("limit"));
    } catch (const std::exception&) {
      reply(res, error_body(400, "usage", "limit must be an integer"));
      return;
    }
    reply(res, service.search_items(req.get_param_value("text"), type, limit));
  });
  server.Get(R"(/v1/items/([^/]+)/image)", [&, reply](const httplib::Request& req, httplib::Response& res) {
    const auto img = service.item_image(req.matches[1]);
    if (!img) {
      reply(res, error_body(404, "not_found", "no image for item " + std::string(req.matches[1]), {req.matches[1]}));
      return;
    }
    res.set_content(img->first, img->second);
  });
  server.Get(R"(/v1/items/([^/]+))", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.get_item(req.matches[1]));
  });
  server.Get("/v1/health", [&, reply](const httplib::Request&, httplib::Response& res) { reply(res, service.health()); });
}

}  // namespace outfit

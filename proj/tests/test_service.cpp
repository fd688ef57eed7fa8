#include <doctest.h>

#include <thread>

#include "outfit/error.hpp"
#include "outfit/service.hpp"
#include "support.hpp"

// After the library headers: httplib defines macros that collide with Eigen.
#include <httplib.h>

using namespace outfit;
using nlohmann::json;

namespace {

struct ServiceFixture {
  SyntheticDataset ds = generate_synthetic_dataset(testing::small_synthetic(9));
  std::shared_ptr<const Model> model = std::make_shared<Model>(testing::small_model_config(), 4);

  ItemTable catalog() const {
    ItemTable t;
    for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
      for (const auto& it : split->items) t.add(it);
    }
    return t;
  }

  ComposerService make(std::optional<std::filesystem::path> persist = std::nullopt) const {
    ServiceConfig cfg;
    cfg.persist_dir = std::move(persist);
    cfg.defaults.seed = 21;
    return ComposerService(model, catalog(), cfg);
  }
};

json create_body() {
  return {{"query_text", "red floral summer dress"}, {"slots", {"tops", "bottoms", "shoes"}}, {"k", 5}, {"seed", 3}};
}

json step(ComposerService& svc, const std::string& id, json req, int expect_status = 200) {
  const long v = svc.get_session(id).body["version"];
  if (!req.contains("expected_version")) req["expected_version"] = v;
  const auto r = svc.step_session(id, req);
  INFO(r.body.dump());
  CHECK(r.status == expect_status);
  return r.body;
}

}  // namespace

TEST_CASE("session lifecycle") {
  ServiceFixture f;
  auto svc = f.make();
  const auto created = svc.create_session(create_body());
  REQUIRE(created.status == 201);
  const std::string id = created.body["session_id"];
  CHECK(created.body["version"] == 1);
  CHECK(created.body["complete"] == false);
  CHECK(created.body["candidates"].size() <= kTraceDepth);
  CHECK(svc.session_count() == 1);

  // Auto step fills exactly the advertised next slot.
  const std::string next = created.body["next_slot"];
  auto s = step(svc, id, {{"action", "auto"}});
  CHECK(s["version"] == 2);
  CHECK(s["filled"].contains(next));
  CHECK(s["trace"].size() == 1);

  SUBCASE("choose an item far down the ranking") {
    const std::string slot = s["next_slot"];
    const GenerationContext ctx{svc.model(), svc.encoded(), svc.pools()};
    PartialOutfit p;
    p.slots = {"tops", "bottoms", "shoes"};
    p.filled[next] = s["filled"][next]["item_id"];
    const auto ranked = rank_candidates(p, svc.model().embed_query("red floral summer dress"), slot, ctx, CompatMode::kCat);
    REQUIRE(ranked.size() > 37);
    const std::string pick = ranked[36].item_id;
    s = step(svc, id, {{"action", "choose"}, {"item_id", pick}});
    CHECK(s["filled"][slot]["item_id"] == pick);
    CHECK(s["trace"].back()["source"] == "choose");

    // An item of another type is not a candidate.
    const std::string last = s["next_slot"];
    const std::string wrong = svc.encoded().ids[svc.pools().at(next)[0]];
    const auto r = svc.step_session(id, {{"expected_version", s["version"]}, {"action", "choose"}, {"item_id", wrong}});
    CHECK(r.status == 422);
    CHECK(last != next);
  }

  SUBCASE("undo reverts the last step") {
    const json first = s["filled"][next]["item_id"];
    s = step(svc, id, {{"action", "undo"}});
    CHECK(s["filled"].empty());
    CHECK(s["trace"].empty());
    CHECK(s["version"] == 3);
    step(svc, id, {{"action", "undo"}}, 409);
    // The same step index redraws the same item.
    const auto again = step(svc, id, {{"action", "auto"}});
    CHECK(again["filled"][next]["item_id"] == first);
  }

  SUBCASE("lock blocks undo") {
    s = step(svc, id, {{"action", "lock"}, {"slot", next}});
    CHECK(s["locked"] == json::array({next}));
    const auto body = step(svc, id, {{"action", "undo"}}, 409);
    CHECK(body["code"] == "locked");
    step(svc, id, {{"action", "unlock"}, {"slot", next}});
    step(svc, id, {{"action", "undo"}});
    step(svc, id, {{"action", "lock"}, {"slot", next}}, 422);
  }

  SUBCASE("stale versions and completed sessions conflict") {
    const auto r = svc.step_session(id, {{"expected_version", 1}, {"action", "auto"}});
    CHECK(r.status == 409);
    CHECK(r.body["code"] == "version_conflict");
    step(svc, id, {{"action", "auto"}});
    s = step(svc, id, {{"action", "auto"}});
    CHECK(s["complete"] == true);
    CHECK(s["next_slot"].is_null());
    const auto done = step(svc, id, {{"action", "auto"}}, 409);
    CHECK(done["code"] == "complete");
    step(svc, id, {{"action", "dance"}}, 400);
    CHECK(svc.step_session(id, {{"action", "auto"}}).status == 400);
  }

  SUBCASE("delete") {
    CHECK(svc.delete_session(id).status == 200);
    CHECK(svc.get_session(id).status == 404);
    CHECK(svc.delete_session(id).status == 404);
    CHECK(svc.session_count() == 0);
  }
}

TEST_CASE("session creation errors") {
  ServiceFixture f;
  auto svc = f.make();
  auto body = create_body();
  body["slots"] = {"tops", "hats"};
  auto r = svc.create_session(body);
  CHECK(r.status == 422);
  CHECK(r.body["details"] == json::array({"hats"}));

  body = create_body();
  body["slots"] = {"tops", "bottoms"};
  const std::string shoe = svc.encoded().ids[svc.pools().at("shoes")[0]];
  body["starting_items"] = {shoe};
  CHECK(svc.create_session(body).status == 422);

  body = create_body();
  body["query_text"] = "  ";
  r = svc.create_session(body);
  CHECK(r.status == 422);
  CHECK(r.body["code"] == std::string(error_code(ErrorKind::kInvalidQuery)));

  body = create_body();
  body["slots"] = json::array();
  CHECK(svc.create_session(body).status == 422);
  CHECK(svc.get_session("nope").status == 404);
  CHECK(svc.session_count() == 0);
}

TEST_CASE("starting items are locked and kept") {
  ServiceFixture f;
  auto svc = f.make();
  auto body = create_body();
  const std::string shoe = svc.encoded().ids[svc.pools().at("shoes")[4]];
  body["starting_items"] = {shoe};
  const auto r = svc.create_session(body);
  REQUIRE(r.status == 201);
  const std::string id = r.body["session_id"];
  CHECK(r.body["locked"] == json::array({"shoes"}));
  step(svc, id, {{"action", "auto"}});
  const auto s = step(svc, id, {{"action", "auto"}});
  CHECK(s["complete"] == true);
  CHECK(s["filled"]["shoes"]["item_id"] == shoe);
}

TEST_CASE("trace replay reproduces the session") {
  ServiceFixture f;
  auto svc = f.make();
  const std::string id = svc.create_session(create_body()).body["session_id"];
  step(svc, id, {{"action", "auto"}});
  const std::string slot = svc.get_session(id).body["next_slot"];
  const std::string pick = svc.get_session(id).body["candidates"][3]["item_id"];
  step(svc, id, {{"action", "choose"}, {"item_id", pick}});
  const auto s = step(svc, id, {{"action", "auto"}});

  std::vector<TraceStep> trace;
  for (const auto& t : s["trace"]) trace.push_back(trace_step_from_json(t));
  const GenerationContext ctx{svc.model(), svc.encoded(), svc.pools()};
  GenerationConfig cfg;
  cfg.k = 5;
  cfg.seed = 3;
  const auto out = replay_trace(partial_outfit_from_json(s["start"]), trace,
                                svc.model().embed_query("red floral summer dress"), ctx, cfg);
  for (const auto& [type, id2] : out.filled) CHECK(s["filled"][type]["item_id"] == id2);
  CHECK(out.filled.at(slot) == pick);
}

TEST_CASE("search matches a brute-force scan") {
  ServiceFixture f;
  auto svc = f.make();
  const std::string text = "black leather boots";
  const Vector q = svc.model().embed_query(text);
  for (std::optional<std::string> type : {std::optional<std::string>{}, std::optional<std::string>{"shoes"}}) {
    const auto r = svc.search_items(text, type, 15);
    REQUIRE(r.status == 200);
    std::vector<std::pair<double, std::string>> oracle;
    for (Eigen::Index i = 0; i < svc.encoded().size(); ++i) {
      if (type && svc.encoded().types[static_cast<std::size_t>(i)] != *type) continue;
      oracle.emplace_back((svc.encoded().embedding(i) - q).norm(), svc.encoded().ids[static_cast<std::size_t>(i)]);
    }
    std::sort(oracle.begin(), oracle.end());
    REQUIRE(r.body["results"].size() == 15);
    for (std::size_t k = 0; k < 15; ++k) {
      CHECK(r.body["results"][k]["item_id"] == oracle[k].second);
      CHECK(r.body["results"][k]["distance"].get<double>() == doctest::Approx(oracle[k].first).epsilon(1e-12));
    }
  }
  CHECK(svc.search_items(text, std::string("hats"), 5).status == 422);
  CHECK(svc.search_items("", std::nullopt, 5).status == 422);
  CHECK(svc.search_items(text, std::nullopt, 0).status == 422);
}

TEST_CASE("sessions persist across restarts") {
  ServiceFixture f;
  testing::TempDir dir("persist");
  std::string id;
  json before;
  {
    auto svc = f.make(dir.path());
    id = svc.create_session(create_body()).body["session_id"];
    step(svc, id, {{"action", "auto"}});
    before = svc.get_session(id).body;
  }
  auto svc = f.make(dir.path());
  CHECK(svc.session_count() == 1);
  const auto after = svc.get_session(id).body;
  CHECK(after["filled"] == before["filled"]);
  CHECK(after["version"] == before["version"]);
  CHECK(after["trace"] == before["trace"]);
  CHECK(after["candidates"] == before["candidates"]);
  CHECK(svc.delete_session(id).status == 200);
  CHECK(f.make(dir.path()).session_count() == 0);
}

TEST_CASE("HTTP routes") {
  ServiceFixture f;
  auto svc = f.make();
  httplib::Server server;
  bind_routes(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto health = cli.Get("/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["items"] == svc.encoded().size());

  auto created = cli.Post("/v1/sessions", create_body().dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const json body = json::parse(created->body);
  const std::string id = body["session_id"];

  auto stepped = cli.Post("/v1/sessions/" + id + "/step", json{{"action", "auto"}, {"expected_version", 1}}.dump(),
                          "application/json");
  REQUIRE(stepped);
  CHECK(stepped->status == 200);
  auto stale = cli.Post("/v1/sessions/" + id + "/step", json{{"action", "auto"}, {"expected_version", 1}}.dump(),
                        "application/json");
  CHECK(stale->status == 409);
  auto bad = cli.Post("/v1/sessions", "{not json", "application/json");
  CHECK(bad->status == 400);

  auto got = cli.Get("/v1/sessions/" + id);
  CHECK(got->status == 200);
  CHECK(json::parse(got->body)["version"] == 2);

  auto search = cli.Get("/v1/items/search?text=red%20dress&type=tops&limit=3");
  REQUIRE(search);
  CHECK(search->status == 200);
  CHECK(json::parse(search->body)["results"].size() == 3);
  CHECK(cli.Get("/v1/items/search?text=red&limit=x")->status == 400);

  const std::string item = svc.encoded().ids[0];
  auto it = cli.Get("/v1/items/" + item);
  CHECK(it->status == 200);
  CHECK(json::parse(it->body)["item_id"] == item);
  auto img = cli.Get("/v1/items/" + item + "/image");
  CHECK(img->status == 200);
  CHECK(img->get_header_value("Content-Type") == "image/png");
  CHECK(img->body.substr(1, 3) == "PNG");
  CHECK(cli.Get("/v1/items/nope")->status == 404);
  CHECK(cli.Get("/v1/items/nope/image")->status == 404);

  CHECK(cli.Delete("/v1/sessions/" + id)->status == 200);
  CHECK(cli.Get("/v1/sessions/" + id)->status == 404);

  server.stop();
  t.join();
}

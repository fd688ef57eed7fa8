// outfit: command-line entry points.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "outfit/board.hpp"
#include "outfit/error.hpp"
#include "outfit/evaluation.hpp"
#include "outfit/generation.hpp"
#include "outfit/polyvore.hpp"
#include "outfit/service.hpp"
#include "outfit/synthetic.hpp"
#include "outfit/training.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace outfit;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string(), {path.string()});
  out << text;
}

LoadOptions options_for(const Checkpoint& ck) {
  LoadOptions o;
  o.resolution = ck.model_config.image.resolution;
  o.vocabulary = ck.vocabulary;
  return o;
}

fs::path data_root_for(const std::string& flag, const Checkpoint& ck) {
  if (!flag.empty()) return flag;
  if (ck.data_root.empty()) throw Error(ErrorKind::kUsage, "--data is required (checkpoint records no data root)");
  return ck.data_root;
}

struct SynthArgs {
  std::string out;
  SyntheticConfig cfg;
  std::string types = "tops,bottoms,shoes";
};

void run_synth(const SynthArgs& a) {
  SyntheticConfig cfg = a.cfg;
  cfg.types = split_list(a.types);
  const auto ds = generate_synthetic_dataset(cfg);
  const std::vector<DatasetSplit> splits = {ds.train, ds.valid, ds.test};
  write_dataset(a.out, splits);
  std::cout << json{{"out", a.out},
                    {"items", ds.train.items.size() + ds.valid.items.size() + ds.test.items.size()},
                    {"outfits", {{"train", ds.train.outfits.size()}, {"valid", ds.valid.outfits.size()},
                                 {"test", ds.test.outfits.size()}}}}
                   .dump()
            << "\n";
}

struct ConvertArgs {
  std::string in, out, variant = "nondisjoint";
  bool no_link = false;
};

void run_convert(const ConvertArgs& a) {
  const auto stats = convert_polyvore(a.in, a.out, {a.variant, !a.no_link});
  std::cout << json{{"items", stats.items},
                    {"types", stats.types},
                    {"outfits", {{"train", stats.outfits_train}, {"valid", stats.outfits_valid},
                                 {"test", stats.outfits_test}}}}
                   .dump()
            << "\n";
}

struct TrainArgs {
  std::string data, out, log, preset = "paper", transforms = "dot,sum,diff", representation = "image";
  TrainConfig cfg;
  std::optional<double> lr;
  std::optional<int> batch_size;
  double embed_init_scale = ModelConfig{}.embed_init_scale;
  int resolution = 64;
  int feature_dim = 128;
  int embed_dim = 128;
  bool last_epoch = false;
  bool l2_all_layers = false;
};

void run_train(TrainArgs a) {
  TrainConfig cfg = a.cfg;
  if (a.preset == "desk") {
    cfg.learning_rate = TrainConfig::desk().learning_rate;
    cfg.batch_size = TrainConfig::desk().batch_size;
  } else if (a.preset != "paper") {
    throw Error(ErrorKind::kUsage, "unknown preset '" + a.preset + "'", {a.preset});
  }
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  cfg.keep_best = !a.last_epoch;
  cfg.validate();
  ModelConfig mc;
  mc.image.resolution = a.resolution;
  mc.image.feature_dim = a.feature_dim;
  mc.text.feature_dim = a.feature_dim;
  mc.embed_dim = a.embed_dim;
  mc.transforms = parse_transforms(a.transforms);
  if (a.representation == "mean") {
    mc.representation = ItemRepresentation::kMean;
  } else if (a.representation != "image") {
    throw Error(ErrorKind::kUsage, "representation must be image or mean");
  }
  mc.l2_all_layers = a.l2_all_layers;
  mc.embed_init_scale = a.embed_init_scale;
  LoadOptions opts;
  opts.resolution = a.resolution;
  const auto train_split = load_dataset(a.data, SplitName::kTrain, opts);
  opts.vocabulary = train_split.type_vocabulary;
  const auto valid_split = load_dataset(a.data, SplitName::kValid, opts);
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path);
  auto result = train(train_split, valid_split, mc, cfg, &log);
  result.checkpoint.data_root = fs::absolute(a.data).lexically_normal().string();
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_checkpoint(result.checkpoint, a.out);
  std::cout << json{{"checkpoint", a.out}, {"log", log_path.string()}, {"metrics", result.checkpoint.metrics},
                    {"threshold", result.checkpoint.threshold}}
                   .dump()
            << "\n";
}

struct CompatArgs {
  std::string data, ckpt, mode = "cat", split = "test", out;
  std::uint64_t seed = 0;
  int negatives = kEvalNegativesPerOutfit;
};

void run_eval_compat(const CompatArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const auto split = load_dataset(data_root_for(a.data, ck), parse_split(a.split), options_for(ck));
  const EncodedItems enc = ck.model->encode(split.items);
  std::vector<CompatMode> modes;
  if (a.mode == "all") {
    modes = {CompatMode::kCat, CompatMode::kImage, CompatMode::kText};
  } else {
    modes = {parse_compat_mode(a.mode)};
  }
  std::vector<CompatReport> reports;
  json rows = json::array();
  for (CompatMode m : modes) {
    reports.push_back(evaluate_compatibility(*ck.model, enc, split, m, a.seed, a.negatives));
    rows.push_back(to_json(reports.back()));
  }
  const json report = {{"split", a.split}, {"seed", a.seed}, {"rows", rows}};
  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
  std::cout << compat_table(reports);
}

struct CoherenceArgs {
  std::string data, out, csv, sampling = "biased", mode = "cat", slots;
  std::vector<std::string> ckpts;
  std::vector<std::string> labels;
  int n = 500, k = 10, permutations = 10000;
  std::uint64_t seed = 0;
};

void run_eval_coherence(const CoherenceArgs& a) {
  std::vector<CoherenceReport> reports;
  json rows = json::array();
  for (std::size_t i = 0; i < a.ckpts.size(); ++i) {
    const Checkpoint ck = load_checkpoint(a.ckpts[i]);
    const fs::path root = data_root_for(a.data, ck);
    const auto valid = load_dataset(root, SplitName::kValid, options_for(ck));
    const auto test = load_dataset(root, SplitName::kTest, options_for(ck));
    std::vector<std::string> queries;
    for (const auto& item : valid.items) queries.push_back(item.text());
    const EncodedItems enc = ck.model->encode(test.items);
    CoherenceConfig cc;
    cc.n_outfits = a.n;
    cc.k = a.k;
    cc.sampling = parse_sampling(a.sampling);
    cc.compat_mode = parse_compat_mode(a.mode);
    cc.permutations = a.permutations;
    cc.seed = a.seed;
    const auto slots = a.slots.empty() ? ck.vocabulary : split_list(a.slots);
    std::string label = i < a.labels.size() ? a.labels[i] : "margin=" + [&] {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", ck.train_config.margin);
      return std::string(buf);
    }();
    reports.push_back(run_coherence_experiment(*ck.model, enc, queries, slots, cc, label));
    rows.push_back(to_json(reports.back(), true));
    if (!a.csv.empty()) {
      fs::path csv = a.csv;
      if (a.ckpts.size() > 1) csv.replace_filename(csv.stem().string() + "_" + std::to_string(i) + csv.extension().string());
      write_text(csv, coherence_scatter_csv(reports.back()));
    }
  }
  const json report = {{"n", a.n}, {"k", a.k}, {"sampling", a.sampling}, {"seed", a.seed}, {"rows", rows}};
  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
  std::cout << coherence_table(reports);
}

struct GenerateArgs {
  std::string ckpt, data, query, slots, sampling = "biased", mode = "cat", out, start, pool = "all";
  int k = 10;
  std::uint64_t seed = 0;
};

void run_generate(const GenerateArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const fs::path root = data_root_for(a.data, ck);
  ItemTable catalog;
  if (a.pool == "all") {
    catalog = load_catalog(root, ck.vocabulary, ck.model_config.image.resolution);
  } else {
    catalog = load_dataset(root, parse_split(a.pool), options_for(ck)).items;
  }
  const EncodedItems enc = ck.model->encode(catalog);
  const CandidatePools pools = pools_by_type(enc);
  const GenerationContext ctx{*ck.model, enc, pools};
  GenerationConfig gc{a.k, parse_sampling(a.sampling), parse_compat_mode(a.mode), a.seed};
  PartialOutfit start;
  start.slots = a.slots.empty() ? ck.vocabulary : split_list(a.slots);
  for (const auto& s : start.slots) {
    if (!pools.contains(s)) throw Error(ErrorKind::kVocabulary, "unknown type '" + s + "'", {s});
  }
  for (const auto& id : split_list(a.start)) {
    const auto& type = catalog.at(id).semantic_type;
    start.filled[type] = id;
    start.locked.insert(type);
  }
  const Vector q = ck.model->embed_query(a.query);
  const auto result = generate_outfit(q, start, ctx, gc);

  json items = json::array();
  for (const auto& slot : result.outfit.slots) {
    const auto& id = result.outfit.filled.at(slot);
    const auto& it = catalog.at(id);
    items.push_back({{"slot", slot}, {"item_id", id}, {"title", it.title}, {"fine_category", it.fine_category},
                     {"locked", result.outfit.locked.contains(slot)}});
  }
  json trace = json::array();
  for (const auto& s : result.trace) trace.push_back(to_json(s));
  const json outfit = {{"query", a.query},
                       {"slots", result.outfit.slots},
                       {"items", items},
                       {"config", {{"k", a.k}, {"sampling", a.sampling}, {"compat_mode", a.mode}, {"seed", a.seed}}},
                       {"trace", trace}};
  std::string board_path, json_path;
  for (const auto& p : split_list(a.out)) {
    (fs::path(p).extension() == ".png" ? board_path : json_path) = p;
  }
  if (!json_path.empty()) write_text(json_path, outfit.dump(2) + "\n");
  if (!board_path.empty()) {
    std::vector<const Image*> tiles;
    for (const auto& id : result.item_ids()) {
      const auto& img = catalog.at(id).image;
      if (!img.data.empty()) tiles.push_back(&img);
    }
    if (fs::path(board_path).has_parent_path()) fs::create_directories(fs::path(board_path).parent_path());
    write_board(board_path, tiles, a.query);
  }
  if (json_path.empty()) std::cout << outfit.dump(2) << "\n";
}

struct ServeArgs {
  std::string ckpt, data, addr = "127.0.0.1:8080", persist_dir, static_dir;
  std::uint64_t seed = 0;
};

void run_serve(const ServeArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  ServiceConfig sc;
  sc.data_root = data_root_for(a.data, ck);
  sc.defaults.seed = a.seed;
  if (!a.persist_dir.empty()) sc.persist_dir = a.persist_dir;
  if (!a.static_dir.empty()) sc.static_dir = a.static_dir;
  ComposerService service(ck.model, load_catalog(sc.data_root, ck.vocabulary, ck.model_config.image.resolution), sc);
  const auto colon = a.addr.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorKind::kUsage, "--addr must be HOST:PORT", {a.addr});
  const std::string host = a.addr.substr(0, colon);
  const int port = std::stoi(a.addr.substr(colon + 1));
  httplib::Server server;
  bind_routes(server, service);
  if (sc.static_dir && !server.set_mount_point("/", sc.static_dir->string())) {
    throw Error(ErrorKind::kConfig, "static dir does not exist: " + sc.static_dir->string());
  }
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw Error(ErrorKind::kIo, "cannot bind " + a.addr, {a.addr});
}

void run_gradcheck(std::uint64_t seed, const std::string& out) {
  const auto report = gradcheck_suite(seed);
  const json j = to_json(report);
  if (!out.empty()) write_text(out, j.dump(2) + "\n");
  for (const auto& e : report.entries) std::printf("%-40s %10.3e  (%d probes)\n", e.name.c_str(), e.max_rel_error, e.probes);
  std::printf("max relative error %.3e: %s\n", report.max_rel_error, report.passed() ? "ok" : "FAILED");
  if (!report.passed()) throw Error(ErrorKind::kNumeric, "gradient check failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-guided outfit generation: data, training, evaluation, generation and serving."};
  app.name("outfit");
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)")->each([](const std::string& v) {
    if (const int n = std::stoi(v); n > 0) omp_set_num_threads(n);
  });

  auto* data = app.add_subcommand("data", "Dataset utilities");
  data->require_subcommand(1);
  SynthArgs synth;
  auto* synth_cmd = data->add_subcommand("synth", "Write a synthetic planted-theme dataset");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--themes", synth.cfg.n_themes, "Number of themes")->capture_default_str();
  synth_cmd->add_option("--items-per-theme", synth.cfg.items_per_theme, "Items per (theme, type)")->capture_default_str();
  synth_cmd->add_option("--types", synth.types, "Comma-separated semantic types")->capture_default_str();
  synth_cmd->add_option("--outfit-len", synth.cfg.outfit_len, "Items per outfit")->capture_default_str();
  synth_cmd->add_option("--outfits", synth.cfg.n_outfits, "Train outfits")->capture_default_str();
  synth_cmd->add_option("--valid-outfits", synth.cfg.n_valid_outfits, "Validation outfits")->capture_default_str();
  synth_cmd->add_option("--test-outfits", synth.cfg.n_test_outfits, "Test outfits")->capture_default_str();
  synth_cmd->add_option("--noise", synth.cfg.noise, "Probability of an off-theme slot")->capture_default_str();
  synth_cmd->add_option("--pixel-noise", synth.cfg.pixel_noise, "Gaussian pixel noise sigma")->capture_default_str();
  synth_cmd->add_option("--resolution", synth.cfg.resolution, "Image side in pixels")->capture_default_str();
  synth_cmd->add_option("--seed", synth.cfg.seed, "Random seed")->capture_default_str();
  synth_cmd->callback([&] { run_synth(synth); });

  ConvertArgs conv;
  auto* conv_cmd = data->add_subcommand("convert-polyvore", "Convert a Polyvore Outfits download");
  conv_cmd->add_option("--in", conv.in, "Polyvore Outfits root")->required();
  conv_cmd->add_option("--out", conv.out, "Output directory")->required();
  conv_cmd->add_option("--variant", conv.variant, "nondisjoint or disjoint")->capture_default_str();
  conv_cmd->add_flag("--no-link-images", conv.no_link, "Do not symlink the images directory");
  std::uint64_t conv_seed = 0;
  conv_cmd->add_option("--seed", conv_seed, "Accepted for uniformity; conversion is deterministic");
  conv_cmd->callback([&] { run_convert(conv); });

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train encoders, embedders and discriminators");
  train_cmd->add_option("--data", tr.data, "Dataset root")->required();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--log", tr.log, "Per-epoch JSONL log (default: <out>.log.jsonl)");
  train_cmd->add_option("--margin", tr.cfg.margin, "Triplet margin alpha")->capture_default_str();
  train_cmd->add_option("--epochs", tr.cfg.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--seed", tr.cfg.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--preset", tr.preset, "paper (lr 1e-5, batch 64) or desk (lr 1e-3, batch 32)")->capture_default_str();
  train_cmd->add_option("--lr", tr.lr, "Learning rate (overrides the preset)");
  train_cmd->add_option("--beta1", tr.cfg.beta1, "Adam beta1")->capture_default_str();
  train_cmd->add_option("--beta2", tr.cfg.beta2, "Adam beta2")->capture_default_str();
  train_cmd->add_option("--batch-size", tr.batch_size, "Positive pairs per batch (overrides the preset)");
  train_cmd->add_option("--embed-init-scale", tr.embed_init_scale, "Init multiplier for the embedders' output layers")
      ->capture_default_str();
  train_cmd->add_option("--l2", tr.cfg.l2, "L2 weight on the embedder output layers")->capture_default_str();
  train_cmd->add_option("--w-embed", tr.cfg.weights.embed, "Embedding loss weight")->capture_default_str();
  train_cmd->add_option("--w-image", tr.cfg.weights.d_image, "Image discriminator loss weight")->capture_default_str();
  train_cmd->add_option("--w-text", tr.cfg.weights.d_text, "Text discriminator loss weight")->capture_default_str();
  train_cmd->add_option("--w-cat", tr.cfg.weights.d_cat, "Concatenated discriminator loss weight")->capture_default_str();
  train_cmd->add_option("--transforms", tr.transforms, "Pair transforms")->capture_default_str();
  train_cmd->add_option("--representation", tr.representation, "Item vector: image or mean")->capture_default_str();
  train_cmd->add_option("--resolution", tr.resolution, "Image side in pixels")->capture_default_str();
  train_cmd->add_option("--feature-dim", tr.feature_dim, "Encoder feature size d_f")->capture_default_str();
  train_cmd->add_option("--embed-dim", tr.embed_dim, "Embedding size d_e")->capture_default_str();
  train_cmd->add_flag("--last-epoch", tr.last_epoch, "Keep the final epoch instead of the best validation AUC");
  train_cmd->add_flag("--l2-all-layers", tr.l2_all_layers, "Regularize every embedder layer");
  train_cmd->add_flag("--per-component-optimizers", tr.cfg.per_component_optimizers,
                      "Separate Adam state per component");
  train_cmd->callback([&] { run_train(tr); });

  auto* eval = app.add_subcommand("eval", "Evaluation");
  eval->require_subcommand(1);
  CompatArgs ca;
  auto* compat_cmd = eval->add_subcommand("compat", "Compatibility AUC and fill-in-the-blank accuracy");
  compat_cmd->add_option("--data", ca.data, "Dataset root (default: the checkpoint's)");
  compat_cmd->add_option("--ckpt", ca.ckpt, "Checkpoint")->required();
  compat_cmd->add_option("--mode", ca.mode, "cat, image, text or all")->capture_default_str();
  compat_cmd->add_option("--split", ca.split, "Split to evaluate")->capture_default_str();
  compat_cmd->add_option("--seed", ca.seed, "Seed for negatives and questions")->capture_default_str();
  compat_cmd->add_option("--negatives", ca.negatives, "Random negatives per outfit")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  compat_cmd->add_option("--out", ca.out, "JSON report path");
  compat_cmd->callback([&] { run_eval_compat(ca); });

  CoherenceArgs co;
  auto* coh_cmd = eval->add_subcommand("coherence", "Query coherence versus compatibility-only generation");
  coh_cmd->add_option("--data", co.data, "Dataset root (default: the checkpoint's)");
  coh_cmd->add_option("--ckpt", co.ckpts, "Checkpoint (repeat for a margin sweep)")->required();
  coh_cmd->add_option("--label", co.labels, "Row label per checkpoint");
  coh_cmd->add_option("--n", co.n, "Outfits per method")->capture_default_str();
  coh_cmd->add_option("--k", co.k, "Top-k threshold")->capture_default_str();
  coh_cmd->add_option("--sampling", co.sampling, "greedy, uniform or biased")->capture_default_str();
  coh_cmd->add_option("--mode", co.mode, "Compatibility mode")->capture_default_str();
  coh_cmd->add_option("--slots", co.slots, "Comma-separated slot types (default: all types)");
  coh_cmd->add_option("--permutations", co.permutations, "Permutation test shuffles")->capture_default_str();
  coh_cmd->add_option("--seed", co.seed, "Random seed")->capture_default_str();
  coh_cmd->add_option("--out", co.out, "JSON report path");
  coh_cmd->add_option("--csv", co.csv, "Scatter CSV path (d_q, d_c)");
  coh_cmd->callback([&] { run_eval_coherence(co); });

  GenerateArgs ga;
  auto* gen_cmd = app.add_subcommand("generate", "Generate one outfit for a text query");
  gen_cmd->add_option("--ckpt", ga.ckpt, "Checkpoint")->required();
  gen_cmd->add_option("--data", ga.data, "Dataset root (default: the checkpoint's)");
  gen_cmd->add_option("--query", ga.query, "Outfit description")->required();
  gen_cmd->add_option("--slots", ga.slots, "Comma-separated slot types (default: all types)");
  gen_cmd->add_option("--start", ga.start, "Comma-separated starting item ids");
  gen_cmd->add_option("--pool", ga.pool, "Candidate items: all, train, valid or test")->capture_default_str();
  gen_cmd->add_option("--k", ga.k, "Top-k threshold")->capture_default_str();
  gen_cmd->add_option("--sampling", ga.sampling, "greedy, uniform or biased")->capture_default_str();
  gen_cmd->add_option("--mode", ga.mode, "Compatibility mode")->capture_default_str();
  gen_cmd->add_option("--seed", ga.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--out", ga.out, "Outputs: board.png and/or outfit.json, comma-separated");
  gen_cmd->callback([&] { run_generate(ga); });

  ServeArgs sa;
  auto* serve_cmd = app.add_subcommand("serve", "Run the /v1 composer API");
  serve_cmd->add_option("--ckpt", sa.ckpt, "Checkpoint")->envname("OUTFIT_CKPT")->required();
  serve_cmd->add_option("--data", sa.data, "Dataset root (default: the checkpoint's)")->envname("OUTFIT_DATA");
  serve_cmd->add_option("--addr", sa.addr, "Bind address HOST:PORT")->envname("OUTFIT_ADDR")->capture_default_str();
  serve_cmd->add_option("--persist-dir", sa.persist_dir, "Session snapshot directory")->envname("OUTFIT_PERSIST_DIR");
  serve_cmd->add_option("--static-dir", sa.static_dir, "Static assets served at /")->envname("OUTFIT_STATIC_DIR");
  serve_cmd->add_option("--seed", sa.seed, "Default session seed")->capture_default_str();
  serve_cmd->callback([&] { run_serve(sa); });

  std::uint64_t gc_seed = 0;
  std::string gc_out;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gc_cmd->add_option("--seed", gc_seed, "Random seed")->capture_default_str();
  gc_cmd->add_option("--out", gc_out, "JSON report path");
  gc_cmd->callback([&] { run_gradcheck(gc_seed, gc_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"code", error_code(e.kind())}, {"message", e.what()}, {"details", e.details()}}}}.dump()
              << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 3;
  }
  return 0;
}

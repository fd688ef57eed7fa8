#include "outfit/training.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <unordered_map>

#include "outfit/error.hpp"
#include "outfit/evaluation.hpp"
#include "outfit/rng.hpp"

namespace outfit {

using nlohmann::json;

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.batch_size = 32;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kConfig, "learning_rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw Error(ErrorKind::kConfig, "beta1 and beta2 must lie in (0, 1)");
  }
  if (epochs < 1) throw Error(ErrorKind::kConfig, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::kConfig, "batch_size must be >= 1");
  if (!(margin > 0.0)) throw Error(ErrorKind::kConfig, "margin must be > 0");
  if (l2 < 0.0) throw Error(ErrorKind::kConfig, "l2 must be >= 0");
  if (weights.embed < 0 || weights.d_image < 0 || weights.d_text < 0 || weights.d_cat < 0) {
    throw Error(ErrorKind::kConfig, "loss weights must be >= 0");
  }
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"margin", c.margin},
          {"l2", c.l2},
          {"weights", {{"embed", c.weights.embed}, {"d_image", c.weights.d_image}, {"d_text", c.weights.d_text},
                       {"d_cat", c.weights.d_cat}}},
          {"seed", c.seed},
          {"keep_best", c.keep_best},
          {"per_component_optimizers", c.per_component_optimizers}};
}

TrainConfig train_config_from_json(const json& j) {
  try {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate");
    c.beta1 = j.at("beta1");
    c.beta2 = j.at("beta2");
    c.epochs = j.at("epochs");
    c.batch_size = j.at("batch_size");
    c.margin = j.at("margin");
    c.l2 = j.at("l2");
    c.weights.embed = j.at("weights").at("embed");
    c.weights.d_image = j.at("weights").at("d_image");
    c.weights.d_text = j.at("weights").at("d_text");
    c.weights.d_cat = j.at("weights").at("d_cat");
    c.seed = j.at("seed");
    c.keep_best = j.value("keep_best", true);
    c.per_component_optimizers = j.value("per_component_optimizers", false);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIntegrity, std::string("malformed train config: ") + e.what());
  }
}

namespace {

Batch gather_cols(const Batch& src, std::span<const std::size_t> cols) {
  Batch out(src.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = src.col(static_cast<Eigen::Index>(cols[k]));
  return out;
}

void scatter_add(Batch& dst, std::span<const std::size_t> cols, const Batch& src, Eigen::Index row0) {
  for (std::size_t k = 0; k < cols.size(); ++k) {
    dst.col(static_cast<Eigen::Index>(cols[k])) += src.col(static_cast<Eigen::Index>(k)).segment(row0, dst.rows());
  }
}

}  // namespace

BatchLoss compute_batch_loss(Model& model, const TrainingBatch& batch, const TrainConfig& config, bool with_grad) {
  const std::size_t m = batch.items.size();
  std::vector<const Image*> images(m);
  std::vector<std::string> texts(m);
  for (std::size_t i = 0; i < m; ++i) {
    const FashionItem& item = *batch.items[i];
    if (item.image.data.empty()) {
      throw Error(ErrorKind::kModality, "training needs an image for item " + item.item_id, {item.item_id});
    }
    images[i] = &item.image;
    texts[i] = item.text();
  }
  std::unique_ptr<BackboneCache> image_cache, text_cache;
  const Batch v_i = model.image_backbone().forward(images, with_grad ? &image_cache : nullptr);
  const Batch v_t = model.text_backbone().forward(texts, with_grad ? &text_cache : nullptr);
  Mlp::Cache ei_cache, et_cache;
  const Batch u_i = model.image_embedder().forward(v_i, &ei_cache);
  const Batch u_t = model.text_embedder().forward(v_t, &et_cache);

  const LossWeights& w = config.weights;
  BatchLoss out;
  const auto regularized = model.regularized();
  out.embed = embedding_loss(u_i, u_t, batch.anchors, batch.negatives, {config.margin, config.l2 * w.embed},
                             regularized, with_grad);
  out.total = w.embed * (out.embed.triplet + out.embed.alignment) + out.embed.l2;

  const Eigen::Index df = v_i.rows();
  Batch dv_i, dv_t;
  if (with_grad) {
    dv_i = Batch::Zero(df, static_cast<Eigen::Index>(m));
    dv_t = Batch::Zero(df, static_cast<Eigen::Index>(m));
  }
  const std::array<CompatMode, 3> modes = {CompatMode::kImage, CompatMode::kText, CompatMode::kCat};
  const std::array<double, 3> weights = {w.d_image, w.d_text, w.d_cat};
  for (std::size_t mi = 0; mi < modes.size(); ++mi) {
    const CompatMode mode = modes[mi];
    Batch fa, fb;
    if (mode == CompatMode::kImage) {
      fa = gather_cols(v_i, batch.pair_a);
      fb = gather_cols(v_i, batch.pair_b);
    } else if (mode == CompatMode::kText) {
      fa = gather_cols(v_t, batch.pair_a);
      fb = gather_cols(v_t, batch.pair_b);
    } else {
      fa.resize(2 * df, static_cast<Eigen::Index>(batch.pair_a.size()));
      fb.resize(2 * df, static_cast<Eigen::Index>(batch.pair_b.size()));
      fa << gather_cols(v_i, batch.pair_a), gather_cols(v_t, batch.pair_a);
      fb << gather_cols(v_i, batch.pair_b), gather_cols(v_t, batch.pair_b);
    }
    Discriminator& disc = model.discriminator(mode);
    Discriminator::Cache cache;
    const Batch probs = disc.score(fa, fb, &cache);
    const BceResult bce = bce_loss(probs, batch.labels, with_grad);
    (mode == CompatMode::kImage ? out.d_image : mode == CompatMode::kText ? out.d_text : out.d_cat) = bce.loss;
    out.total += weights[mi] * bce.loss;
    if (!with_grad || weights[mi] == 0.0) continue;
    Batch dx, dy;
    disc.backward(fa, fb, cache, weights[mi] * bce.d_logits, dx, dy);
    if (mode != CompatMode::kText) {
      scatter_add(dv_i, batch.pair_a, dx, 0);
      scatter_add(dv_i, batch.pair_b, dy, 0);
    }
    if (mode != CompatMode::kImage) {
      const Eigen::Index row0 = mode == CompatMode::kCat ? df : 0;
      scatter_add(dv_t, batch.pair_a, dx, row0);
      scatter_add(dv_t, batch.pair_b, dy, row0);
    }
  }
  if (with_grad) {
    dv_i += model.image_embedder().backward(ei_cache, w.embed * out.embed.d_image);
    dv_t += model.text_embedder().backward(et_cache, w.embed * out.embed.d_text);
    model.image_backbone().backward(*image_cache, dv_i);
    model.text_backbone().backward(*text_cache, dv_t);
  }
  return out;
}

TrainingBatch make_batch(const ItemTable& items, std::span<const PairSample> pairs, Rng& rng) {
  TrainingBatch b;
  std::unordered_map<std::string, std::size_t> slot;
  auto index_of = [&](const std::string& id) {
    auto [it, fresh] = slot.try_emplace(id, b.items.size());
    if (fresh) b.items.push_back(&items.at(id));
    return it->second;
  };
  for (const auto& p : pairs) {
    b.pair_a.push_back(index_of(p.item_a));
    b.pair_b.push_back(index_of(p.item_b));
    b.labels.push_back(p.label);
  }
  if (b.items.size() < 2) throw Error(ErrorKind::kConfig, "a training batch needs at least two distinct items");
  for (std::size_t x = 0; x < b.items.size(); ++x) {
    std::size_t y = rng.index(b.items.size() - 1);
    if (y >= x) ++y;
    b.anchors.push_back(x);
    b.negatives.push_back(y);
  }
  return b;
}

namespace {

std::vector<std::vector<Param*>> optimizer_groups(Model& model, bool per_component) {
  if (!per_component) return {model.parameters()};
  std::vector<std::vector<Param*>> groups(5);
  model.image_backbone().collect(groups[0]);
  model.text_backbone().collect(groups[0]);
  model.image_embedder().collect(groups[1]);
  model.text_embedder().collect(groups[1]);
  model.discriminator(CompatMode::kImage).collect(groups[2]);
  model.discriminator(CompatMode::kText).collect(groups[3]);
  model.discriminator(CompatMode::kCat).collect(groups[4]);
  return groups;
}

std::vector<Matrix> snapshot(const std::vector<Param*>& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const Param* p : params) out.push_back(p->value);
  return out;
}

void restore(const std::vector<Param*>& params, const std::vector<Matrix>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

TrainResult train(const DatasetSplit& train_split, const DatasetSplit& valid_split, const ModelConfig& model_config,
                  const TrainConfig& config, std::ostream* log) {
  config.validate();
  if (train_split.outfits.empty()) throw Error(ErrorKind::kConfig, "train split has no outfits");
  const auto positives = generate_positive_pairs(train_split.outfits);
  if (positives.empty()) throw Error(ErrorKind::kConfig, "train split has no positive pairs");
  if (valid_split.outfits.empty()) throw Error(ErrorKind::kConfig, "validation split has no outfits");

  auto model = std::make_shared<Model>(model_config, mix_seed(config.seed, 1));
  const auto params = model->parameters();
  auto groups = optimizer_groups(*model, config.per_component_optimizers);
  std::vector<Adam> optimizers(groups.size(), Adam(AdamConfig{config.learning_rate, config.beta1, config.beta2}));

  const auto valid_negatives = make_random_negative_outfits(valid_split.outfits, valid_split.items, mix_seed(config.seed, 7));
  auto validate = [&](CompatMode mode) {
    const EncodedItems enc = model->encode(valid_split.items);
    return compatibility_auc(valid_split.outfits, valid_negatives, model_scorer(*model, enc, mode));
  };

  TrainResult result;
  double best_auc = -1.0;
  std::vector<Matrix> best;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto negatives = sample_negative_pairs(positives, train_split.items, config.seed ^ static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> order(positives.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(config.seed, 0x7000 + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    Rng batch_rng(mix_seed(config.seed, 0x8000 + static_cast<std::uint64_t>(epoch)));

    double sum_total = 0, sum_triplet = 0, sum_align = 0, sum_l2 = 0, sum_di = 0, sum_dt = 0, sum_dc = 0;
    int batches = 0;
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<PairSample> pairs;
      for (std::size_t i = start; i < end; ++i) pairs.push_back(positives[order[i]]);
      for (std::size_t i = start; i < end; ++i) pairs.push_back(negatives[order[i]]);
      const TrainingBatch batch = make_batch(train_split.items, pairs, batch_rng);
      for (Param* p : params) p->zero_grad();
      const BatchLoss loss = compute_batch_loss(*model, batch, config, true);
      if (!std::isfinite(loss.total)) {
        throw Error(ErrorKind::kNumeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                             std::to_string(batches),
                    {"epoch=" + std::to_string(epoch), "batch=" + std::to_string(batches),
                     "triplet=" + std::to_string(loss.embed.triplet), "alignment=" + std::to_string(loss.embed.alignment),
                     "l2=" + std::to_string(loss.embed.l2), "d_image=" + std::to_string(loss.d_image),
                     "d_text=" + std::to_string(loss.d_text), "d_cat=" + std::to_string(loss.d_cat)});
      }
      for (std::size_t g = 0; g < groups.size(); ++g) optimizers[g].step(groups[g]);
      sum_total += loss.total;
      sum_triplet += loss.embed.triplet;
      sum_align += loss.embed.alignment;
      sum_l2 += loss.embed.l2;
      sum_di += loss.d_image;
      sum_dt += loss.d_text;
      sum_dc += loss.d_cat;
      ++batches;
    }
    const double val_auc = validate(CompatMode::kCat);
    const double nb = static_cast<double>(batches);
    json entry = {{"epoch", epoch},         {"batches", batches},        {"loss", sum_total / nb},
                  {"triplet", sum_triplet / nb}, {"alignment", sum_align / nb}, {"l2", sum_l2 / nb},
                  {"d_image", sum_di / nb}, {"d_text", sum_dt / nb},     {"d_cat", sum_dc / nb},
                  {"val_auc", val_auc}};
    if (log != nullptr) *log << entry.dump() << '\n';
    result.log.push_back(std::move(entry));
    if (!config.keep_best || val_auc > best_auc) {
      best_auc = val_auc;
      best = snapshot(params);
      result.best_epoch = epoch;
    }
  }
  restore(params, best);

  // Threshold on validation pairs, cat mode.
  const EncodedItems enc = model->encode(valid_split.items);
  const auto val_pos = generate_positive_pairs(valid_split.outfits);
  const auto val_neg = sample_negative_pairs(val_pos, valid_split.items, mix_seed(config.seed, 9));
  std::vector<double> scores;
  std::vector<int> labels;
  const auto scorer = model_scorer(*model, enc, CompatMode::kCat);
  for (const auto* set : {&val_pos, &val_neg}) {
    for (const auto& p : *set) {
      scores.push_back(scorer(p.item_a, p.item_b));
      labels.push_back(p.label);
    }
  }
  const Threshold threshold = select_threshold(scores, labels);

  Checkpoint& ck = result.checkpoint;
  ck.model_config = model_config;
  ck.train_config = config;
  ck.vocabulary = train_split.type_vocabulary;
  ck.threshold = threshold.theta;
  ck.metrics = {{"best_epoch", result.best_epoch},
                {"val_auc", {{"cat", validate(CompatMode::kCat)},
                             {"image", validate(CompatMode::kImage)},
                             {"text", validate(CompatMode::kText)}}},
                {"val_balanced_accuracy", threshold.balanced_accuracy}};
  ck.model = std::move(model);
  return result;
}

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.image.resolution = 16;
  c.image.channels = {2, 3, 4};
  c.image.first_stride = 2;
  c.image.feature_dim = 6;
  c.text.buckets = 64;
  c.text.hidden = 8;
  c.text.feature_dim = 6;
  c.embed_hidden = 5;
  c.embed_dim = 4;
  c.disc_hidden1 = 7;
  c.disc_hidden2 = 5;
  return c;
}

namespace {

constexpr double kStep = 1e-5;
constexpr int kProbes = 6;

double rel_error(double a, double n) { return std::abs(a - n) / std::max(std::abs(a) + std::abs(n), 1e-6); }

// Central differences of f at `probes` random coordinates of data[0..size).
double probe(const std::function<double()>& f, double* data, std::size_t size, const double* analytic, Rng& rng,
             int& probes) {
  double worst = 0.0;
  const std::size_t count = std::min<std::size_t>(size, kProbes);
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i) idx[i] = i;
  rng.shuffle(idx);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = idx[k];
    const double saved = data[i];
    data[i] = saved + kStep;
    const double up = f();
    data[i] = saved - kStep;
    const double down = f();
    data[i] = saved;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * kStep)));
    ++probes;
  }
  return worst;
}

Batch random_batch(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Batch b(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) b(i, j) = rng.normal();
  return b;
}

Image random_image(int res, Rng& rng) {
  Image img(res, res);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

void add_entry(GradcheckReport& report, std::string name, double err, int probes) {
  report.entries.push_back({std::move(name), err, probes});
  report.max_rel_error = std::max(report.max_rel_error, err);
}

// Matrix storage is row-major; grads share the layout of values.
double probe_param(const std::function<double()>& f, Param& p, const Matrix& analytic, Rng& rng, int& probes) {
  return probe(f, p.value.data(), static_cast<std::size_t>(p.value.size()), analytic.data(), rng, probes);
}

}  // namespace

GradcheckReport gradcheck_suite(std::uint64_t seed) {
  GradcheckReport report;
  Rng rng(mix_seed(seed, 0x6763ULL));

  {  // triplet loss; a large margin keeps the hinge active
    Vector a = random_batch(5, 1, rng), p = random_batch(5, 1, rng), n = random_batch(5, 1, rng);
    const double margin = 20.0;
    const auto g = triplet_loss_grad(a, p, n, margin);
    auto f = [&] { return triplet_loss(a, p, n, margin); };
    int probes = 0;
    double err = probe(f, a.data(), 5, g.da.data(), rng, probes);
    err = std::max(err, probe(f, p.data(), 5, g.dp.data(), rng, probes));
    err = std::max(err, probe(f, n.data(), 5, g.dn.data(), rng, probes));
    add_entry(report, "triplet_loss", err, probes);
  }
  {  // embedding loss with the L2 term
    Batch ui = random_batch(4, 6, rng), ut = random_batch(4, 6, rng);
    Param w1("w1", 3, 4), w2("w2", 4, 2);
    w1.value = random_batch(3, 4, rng);
    w2.value = random_batch(4, 2, rng);
    std::vector<Param*> reg = {&w1, &w2};
    const std::vector<std::size_t> anchors = {0, 1, 2, 3, 4, 5};
    const std::vector<std::size_t> negatives = {3, 4, 5, 0, 1, 2};
    const EmbeddingLossConfig cfg{3.0, 0.05};
    const auto terms = embedding_loss(ui, ut, anchors, negatives, cfg, reg, true);
    auto f = [&] { return embedding_loss(ui, ut, anchors, negatives, cfg, {}, false).total +
                          cfg.l2 * (w1.value.squaredNorm() + w2.value.squaredNorm()); };
    int probes = 0;
    double err = probe(f, ui.data(), static_cast<std::size_t>(ui.size()), terms.d_image.data(), rng, probes);
    err = std::max(err, probe(f, ut.data(), static_cast<std::size_t>(ut.size()), terms.d_text.data(), rng, probes));
    const Matrix g1 = w1.grad, g2 = w2.grad;
    err = std::max(err, probe_param(f, w1, g1, rng, probes));
    err = std::max(err, probe_param(f, w2, g2, rng, probes));
    add_entry(report, "embedding_loss", err, probes);
  }
  {  // discriminator + BCE, inputs and weights
    Discriminator d("disc", 4, kAllTransforms, 7, 5);
    d.init(rng);
    Batch x = random_batch(4, 6, rng), y = random_batch(4, 6, rng);
    const std::vector<int> labels = {1, 0, 1, 1, 0, 0};
    std::vector<Param*> ps;
    d.collect(ps);
    for (Param* p : ps) p->zero_grad();
    Discriminator::Cache cache;
    const auto bce = bce_loss(d.score(x, y, &cache), labels, true);
    Batch dx, dy;
    d.backward(x, y, cache, bce.d_logits, dx, dy);
    auto f = [&] { return bce_loss(d.score(x, y), labels, false).loss; };
    int probes = 0;
    double err = probe(f, x.data(), static_cast<std::size_t>(x.size()), dx.data(), rng, probes);
    err = std::max(err, probe(f, y.data(), static_cast<std::size_t>(y.size()), dy.data(), rng, probes));
    for (Param* p : ps) {
      const Matrix g = p->grad;
      err = std::max(err, probe_param(f, *p, g, rng, probes));
    }
    add_entry(report, "discriminator_bce", err, probes);
  }
  const ModelConfig tiny = tiny_model_config();
  {  // reference CNN
    ReferenceCnn cnn(tiny.image);
    cnn.init(mix_seed(seed, 2));
    std::vector<Image> imgs;
    for (int i = 0; i < 5; ++i) imgs.push_back(random_image(tiny.image.resolution, rng));
    std::vector<const Image*> ptrs;
    for (const auto& im : imgs) ptrs.push_back(&im);
    const Batch weights = random_batch(tiny.image.feature_dim, 5, rng);
    std::vector<Param*> ps;
    cnn.collect(ps);
    for (Param* p : ps) p->zero_grad();
    std::unique_ptr<BackboneCache> cache;
    cnn.forward(ptrs, &cache);
    cnn.backward(*cache, weights);
    auto f = [&] { return cnn.forward(ptrs).cwiseProduct(weights).sum(); };
    for (Param* p : ps) {
      int probes = 0;
      const Matrix g = p->grad;
      const double err = probe_param(f, *p, g, rng, probes);
      add_entry(report, "reference_cnn:" + p->name, err, probes);
    }
  }
  {  // hashed text encoder
    HashedTextEncoder text(tiny.text);
    text.init(mix_seed(seed, 3));
    const std::vector<std::string> texts = {"red floral summer dress", "black leather boots", "plain white tee shirt"};
    const Batch weights = random_batch(tiny.text.feature_dim, 3, rng);
    std::vector<Param*> ps;
    text.collect(ps);
    for (Param* p : ps) p->zero_grad();
    std::unique_ptr<BackboneCache> cache;
    text.forward(texts, &cache);
    text.backward(*cache, weights);
    auto f = [&] { return text.forward(texts).cwiseProduct(weights).sum(); };
    for (Param* p : ps) {
      int probes = 0;
      const Matrix g = p->grad;
      const double err = probe_param(f, *p, g, rng, probes);
      add_entry(report, "hashed_text:" + p->name, err, probes);
    }
  }
  {  // full model: every tensor of the joint loss
    Model model(tiny, mix_seed(seed, 4));
    // Zero biases over dead inputs leave pre-activations exactly on the ReLU
    // kink; move them off it.
    for (Param* p : model.parameters()) {
      if (p->name.ends_with(".bias")) {
        for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = 0.1 * rng.normal();
      }
    }
    ItemTable items;
    const std::vector<std::string> types = {"tops", "bottoms", "shoes"};
    const std::vector<std::string> words = {"red floral", "black leather", "blue denim", "white linen", "green wool"};
    for (int i = 0; i < 5; ++i) {
      FashionItem it;
      it.item_id = "g" + std::to_string(i);
      it.title = words[static_cast<std::size_t>(i)];
      it.description = "item " + std::to_string(i);
      it.semantic_type = types[static_cast<std::size_t>(i) % types.size()];
      it.image = random_image(tiny.image.resolution, rng);
      items.add(std::move(it));
    }
    const std::vector<PairSample> pairs = {{"g0", "g1", 1}, {"g1", "g2", 1}, {"g2", "g3", 0}, {"g0", "g4", 0}};
    Rng brng(mix_seed(seed, 5));
    const TrainingBatch batch = make_batch(items, pairs, brng);
    TrainConfig cfg;
    cfg.margin = 5.0;
    cfg.l2 = 0.01;
    const auto params = model.parameters();
    for (Param* p : params) p->zero_grad();
    compute_batch_loss(model, batch, cfg, true);
    std::vector<Matrix> grads;
    for (Param* p : params) grads.push_back(p->grad);
    auto f = [&] { return compute_batch_loss(model, batch, cfg, false).total; };
    for (std::size_t i = 0; i < params.size(); ++i) {
      int probes = 0;
      const double err = probe_param(f, *params[i], grads[i], rng, probes);
      add_entry(report, "model:" + params[i]->name, err, probes);
      report.model_tensors.push_back(params[i]->name);
    }
  }
  return report;
}

json to_json(const GradcheckReport& report) {
  json entries = json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"name", e.name}, {"max_rel_error", e.max_rel_error}, {"probes", e.probes}});
  }
  return {{"entries", entries},
          {"max_rel_error", report.max_rel_error},
          {"model_tensors", report.model_tensors},
          {"passed", report.passed()}};
}

}  // namespace outfit

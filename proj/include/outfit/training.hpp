#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "outfit/catalog.hpp"
#include "outfit/model.hpp"

namespace outfit {

struct LossWeights {
  double embed = 1.0;
  double d_image = 1.0;
  double d_text = 1.0;
  double d_cat = 1.0;
};

struct TrainConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int epochs = 20;
  int batch_size = 64;
  double margin = 1.0;
  double l2 = 5e-4;
  LossWeights weights;
  std::uint64_t seed = 0;
  /// Keep the epoch with the best validation AUC rather than the last one.
  bool keep_best = true;
  /// Separate Adam state per component (backbones, embedders, each D).
  bool per_component_optimizers = false;

  /// Small-data preset: same schedule with a larger step size.
  static TrainConfig desk();
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  std::vector<std::string> vocabulary;
  double threshold = 0.5;
  nlohmann::json metrics = nlohmann::json::object();
  std::string data_root;
  std::shared_ptr<Model> model;
};

/// Items and labeled pairs of one step. Pair and anchor entries index `items`.
struct TrainingBatch {
  std::vector<const FashionItem*> items;
  std::vector<std::size_t> pair_a;
  std::vector<std::size_t> pair_b;
  std::vector<int> labels;
  std::vector<std::size_t> anchors;
  std::vector<std::size_t> negatives;  // embedding negative for each anchor
};

struct BatchLoss {
  double total = 0.0;
  EmbeddingLossTerms embed;
  double d_image = 0.0;
  double d_text = 0.0;
  double d_cat = 0.0;
};

/// Weighted total of the embedding loss and the three discriminator BCE
/// losses. With `with_grad`, gradients are accumulated into the model's
/// parameters (callers zero them first).
BatchLoss compute_batch_loss(Model& model, const TrainingBatch& batch, const TrainConfig& config, bool with_grad);

/// Builds the batch for `pairs` (positives followed by their negatives);
/// embedding negatives are drawn from the other batch items with `rng`.
TrainingBatch make_batch(const ItemTable& items, std::span<const PairSample> pairs, Rng& rng);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<nlohmann::json> log;  // one entry per epoch
  int best_epoch = 0;
};

/// Joint training. `log` (optional) receives one JSON line per epoch.
TrainResult train(const DatasetSplit& train_split, const DatasetSplit& valid_split, const ModelConfig& model_config,
                  const TrainConfig& config, std::ostream* log = nullptr);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct GradcheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  int probes = 0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0.0;
  /// Tensor names of the full-model check, in parameter order.
  std::vector<std::string> model_tensors;
  bool passed(double tolerance = 1e-4) const { return max_rel_error < tolerance; }
};

/// Central differences (h = 1e-5) against analytic gradients on tiny
/// configurations of every loss and backbone, plus a full-model check that
/// covers every parameter tensor.
GradcheckReport gradcheck_suite(std::uint64_t seed);
nlohmann::json to_json(const GradcheckReport& report);

/// Small architecture used by the gradient check.
ModelConfig tiny_model_config();

}  // namespace outfit

#include "outfit/generation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "outfit/error.hpp"
#include "outfit/kernels.hpp"

namespace outfit {

using nlohmann::json;

std::string_view to_string(Sampling sampling) {
  switch (sampling) {
    case Sampling::kGreedy: return "greedy";
    case Sampling::kUniform: return "uniform";
    case Sampling::kBiased: return "biased";
  }
  return "biased";
}

Sampling parse_sampling(std::string_view name) {
  if (name == "greedy") return Sampling::kGreedy;
  if (name == "uniform") return Sampling::kUniform;
  if (name == "biased") return Sampling::kBiased;
  throw Error(ErrorKind::kConfig, "unknown sampling mode '" + std::string(name) + "'", {std::string(name)});
}

std::vector<std::string> PartialOutfit::unfilled() const {
  std::vector<std::string> out;
  for (const auto& s : slots) {
    if (!filled.contains(s)) out.push_back(s);
  }
  return out;
}

bool PartialOutfit::contains_item(const std::string& id) const {
  return std::any_of(filled.begin(), filled.end(), [&](const auto& kv) { return kv.second == id; });
}

void PartialOutfit::validate() const {
  std::set<std::string> seen;
  for (const auto& s : slots) {
    if (!seen.insert(s).second) throw Error(ErrorKind::kConfig, "slot type '" + s + "' is repeated", {s});
  }
  for (const auto& [slot, id] : filled) {
    if (!seen.contains(slot)) throw Error(ErrorKind::kConfig, "filled slot '" + slot + "' is not a requested slot", {slot});
  }
  for (const auto& slot : locked) {
    if (!filled.contains(slot)) throw Error(ErrorKind::kConfig, "locked slot '" + slot + "' is not filled", {slot});
  }
}

CandidatePools pools_by_type(const EncodedItems& items) {
  CandidatePools pools;
  for (Eigen::Index i = 0; i < items.size(); ++i) pools[items.types[static_cast<std::size_t>(i)]].push_back(i);
  return pools;
}

namespace {

const std::vector<Eigen::Index>& pool_of(const CandidatePools& pools, const std::string& type) {
  auto it = pools.find(type);
  if (it == pools.end() || it->second.empty()) {
    throw Error(ErrorKind::kPool, "no candidates of type '" + type + "'", {type});
  }
  return it->second;
}

Batch gather(const EncodedItems& items, std::span<const Eigen::Index> cols) {
  Batch out(items.u_image.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = items.embedding(cols[k]);
  return out;
}

// Mean compatibility of each candidate to the filled items (in slot order).
std::vector<double> mean_compat(const PartialOutfit& partial, std::span<const Eigen::Index> candidates,
                                const GenerationContext& ctx, CompatMode mode) {
  std::vector<Eigen::Index> filled;
  for (const auto& s : partial.slots) {
    auto it = partial.filled.find(s);
    if (it != partial.filled.end()) filled.push_back(ctx.items.at(it->second));
  }
  const auto& disc = ctx.model.discriminator(mode);
  const Eigen::Index n = static_cast<Eigen::Index>(candidates.size());
  const int dim = static_cast<int>(ctx.items.feature(mode, candidates.empty() ? 0 : candidates[0]).size());
  Batch xs(dim, n);
  for (Eigen::Index k = 0; k < n; ++k) xs.col(k) = ctx.items.feature(mode, candidates[static_cast<std::size_t>(k)]);
  std::vector<double> sum(candidates.size(), 0.0);
  for (Eigen::Index y : filled) {
    const Batch ys = ctx.items.feature(mode, y).replicate(1, n);
    const Batch scores = disc.score(xs, ys);
    for (Eigen::Index k = 0; k < n; ++k) sum[static_cast<std::size_t>(k)] += scores(0, k);
  }
  for (auto& s : sum) s /= static_cast<double>(filled.size());
  return sum;
}

std::vector<Eigen::Index> open_candidates(const PartialOutfit& partial, const std::string& type,
                                          const GenerationContext& ctx) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i : pool_of(ctx.pools, type)) {
    if (!partial.contains_item(ctx.items.ids[static_cast<std::size_t>(i)])) out.push_back(i);
  }
  if (out.empty()) throw Error(ErrorKind::kPool, "every candidate of type '" + type + "' is already used", {type});
  return out;
}

}  // namespace

std::optional<std::string> select_next_slot(const PartialOutfit& partial, const Vector& q, const EncodedItems& items,
                                            const CandidatePools& pools) {
  auto unfilled = partial.unfilled();
  if (unfilled.empty()) return std::nullopt;
  std::sort(unfilled.begin(), unfilled.end());
  std::optional<std::string> best;
  double best_mean = std::numeric_limits<double>::infinity();
  for (const auto& type : unfilled) {
    const auto& pool = pool_of(pools, type);
    const Vector d = kernels::column_distances(gather(items, pool), q);
    const double mean = d.mean();
    if (!best || mean < best_mean) {
      best = type;
      best_mean = mean;
    }
  }
  return best;
}

void order_candidates(std::vector<RankedCandidate>& ranked) {
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.item_id < b.item_id;
  });
}

std::vector<RankedCandidate> rank_candidates(const PartialOutfit& partial, const Vector& q, const std::string& type,
                                             const GenerationContext& ctx, CompatMode mode) {
  const auto candidates = open_candidates(partial, type, ctx);
  const Vector d = kernels::column_distances(gather(ctx.items, candidates), q);
  std::vector<RankedCandidate> out(candidates.size());
  std::vector<double> compat;
  if (!partial.filled.empty()) compat = mean_compat(partial, candidates, ctx, mode);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    auto& c = out[k];
    c.item_id = ctx.items.ids[static_cast<std::size_t>(candidates[k])];
    c.distance = d[static_cast<Eigen::Index>(k)];
    if (compat.empty()) {
      c.rank = c.distance;
    } else {
      c.compat = compat[k];
      c.rank = c.distance / compat[k];
    }
  }
  order_candidates(out);
  return out;
}

std::vector<RankedCandidate> rank_by_compatibility(const PartialOutfit& partial, const std::string& type,
                                                   const GenerationContext& ctx, CompatMode mode) {
  if (partial.filled.empty()) throw Error(ErrorKind::kConfig, "compatibility ranking needs at least one filled item");
  const auto candidates = open_candidates(partial, type, ctx);
  const auto compat = mean_compat(partial, candidates, ctx, mode);
  std::vector<RankedCandidate> out(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    out[k].item_id = ctx.items.ids[static_cast<std::size_t>(candidates[k])];
    out[k].distance = 0.0;
    out[k].compat = compat[k];
    out[k].rank = 1.0 / compat[k];
  }
  order_candidates(out);
  return out;
}

std::vector<double> sampling_probabilities(std::span<const RankedCandidate> ranked, const GenerationConfig& config) {
  if (ranked.empty()) throw Error(ErrorKind::kPool, "cannot sample from an empty ranking");
  if (config.k < 1) throw Error(ErrorKind::kConfig, "k must be at least 1");
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(config.k), ranked.size());
  std::vector<double> p(ranked.size(), 0.0);
  switch (config.sampling) {
    case Sampling::kGreedy:
      p[0] = 1.0;
      break;
    case Sampling::kUniform:
      for (std::size_t i = 0; i < kk; ++i) p[i] = 1.0 / static_cast<double>(kk);
      break;
    case Sampling::kBiased: {
      // e^{-r_i} / sum_j e^{-r_j}, shifted by the smallest r for stability.
      double r_min = ranked[0].rank;
      for (std::size_t i = 0; i < kk; ++i) r_min = std::min(r_min, ranked[i].rank);
      double z = 0.0;
      for (std::size_t i = 0; i < kk; ++i) {
        p[i] = std::exp(-(ranked[i].rank - r_min));
        z += p[i];
      }
      for (std::size_t i = 0; i < kk; ++i) p[i] /= z;
      break;
    }
  }
  return p;
}

std::string sample_from_ranked(std::span<const RankedCandidate> ranked, const GenerationConfig& config, Rng& rng) {
  const auto p = sampling_probabilities(ranked, config);
  if (config.sampling == Sampling::kGreedy) return ranked[0].item_id;
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(config.k), ranked.size());
  if (config.sampling == Sampling::kUniform) return ranked[rng.index(kk)].item_id;
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < kk; ++i) {
    acc += p[i];
    if (u < acc) return ranked[i].item_id;
  }
  return ranked[kk - 1].item_id;
}

Rng step_rng(std::uint64_t seed, std::size_t step_index) { return Rng(mix_seed(seed, 0x5157ULL + step_index)); }

std::vector<std::string> GenerationResult::item_ids() const {
  std::vector<std::string> out;
  for (const auto& s : outfit.slots) {
    auto it = outfit.filled.find(s);
    if (it != outfit.filled.end()) out.push_back(it->second);
  }
  return out;
}

TraceStep auto_step(PartialOutfit& partial, const Vector& q, const GenerationContext& ctx,
                    const GenerationConfig& config, std::size_t step_index) {
  const auto type = select_next_slot(partial, q, ctx.items, ctx.pools);
  if (!type) throw Error(ErrorKind::kConflict, "outfit is complete");
  const auto ranked = rank_candidates(partial, q, *type, ctx, config.compat_mode);
  Rng rng = step_rng(config.seed, step_index);
  TraceStep step;
  step.type = *type;
  step.chosen = sample_from_ranked(ranked, config, rng);
  step.sampling = config.sampling;
  step.top.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(kTraceDepth, ranked.size())));
  partial.filled[*type] = step.chosen;
  return step;
}

GenerationResult generate_outfit(const Vector& q, const PartialOutfit& start, const GenerationContext& ctx,
                                 const GenerationConfig& config) {
  start.validate();
  GenerationResult result;
  result.outfit = start;
  while (!result.outfit.complete()) {
    result.trace.push_back(auto_step(result.outfit, q, ctx, config, result.trace.size()));
  }
  return result;
}

GenerationResult baseline_generate(const std::string& seed_item, const std::vector<std::string>& slots,
                                   const GenerationContext& ctx, const GenerationConfig& config) {
  GenerationResult result;
  result.outfit.slots = slots;
  const auto seed_idx = ctx.items.at(seed_item);
  const std::string& seed_type = ctx.items.types[static_cast<std::size_t>(seed_idx)];
  if (std::find(slots.begin(), slots.end(), seed_type) == slots.end()) {
    throw Error(ErrorKind::kConfig, "seed item type '" + seed_type + "' is not among the slots", {seed_type});
  }
  result.outfit.filled[seed_type] = seed_item;
  result.outfit.locked.insert(seed_type);
  result.outfit.validate();
  for (const auto& type : slots) {
    if (result.outfit.filled.contains(type)) continue;
    const auto ranked = rank_by_compatibility(result.outfit, type, ctx, config.compat_mode);
    Rng rng = step_rng(config.seed, result.trace.size());
    TraceStep step;
    step.type = type;
    step.chosen = sample_from_ranked(ranked, config, rng);
    step.sampling = config.sampling;
    step.top.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(kTraceDepth, ranked.size())));
    result.outfit.filled[type] = step.chosen;
    result.trace.push_back(std::move(step));
  }
  return result;
}

PartialOutfit replay_trace(const PartialOutfit& start, std::span<const TraceStep> trace, const Vector& q,
                           const GenerationContext& ctx, const GenerationConfig& config) {
  PartialOutfit partial = start;
  partial.validate();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceStep& recorded = trace[i];
    if (recorded.user_choice) {
      if (partial.filled.contains(recorded.type)) {
        throw Error(ErrorKind::kIntegrity, "trace step " + std::to_string(i) + " fills an occupied slot");
      }
      partial.filled[recorded.type] = recorded.chosen;
      continue;
    }
    GenerationConfig step_config = config;
    step_config.sampling = recorded.sampling;
    const TraceStep replayed = auto_step(partial, q, ctx, step_config, i);
    if (replayed.type != recorded.type || replayed.chosen != recorded.chosen) {
      throw Error(ErrorKind::kIntegrity, "trace step " + std::to_string(i) + " does not replay: recorded " +
                                             recorded.chosen + ", recomputed " + replayed.chosen);
    }
  }
  return partial;
}

json to_json(const RankedCandidate& c) {
  return {{"item_id", c.item_id},
          {"distance", c.distance},
          {"compat", c.compat ? json(*c.compat) : json(nullptr)},
          {"rank_score", c.rank}};
}

json to_json(const TraceStep& step) {
  json top = json::array();
  for (const auto& c : step.top) top.push_back(to_json(c));
  return {{"type", step.type},
          {"candidates", top},
          {"chosen", step.chosen},
          {"sampling", std::string(to_string(step.sampling))},
          {"source", step.user_choice ? "choose" : "auto"}};
}

TraceStep trace_step_from_json(const json& j) {
  TraceStep s;
  s.type = j.at("type");
  s.chosen = j.at("chosen");
  s.sampling = parse_sampling(j.at("sampling").get<std::string>());
  s.user_choice = j.at("source") == "choose";
  for (const auto& c : j.at("candidates")) {
    RankedCandidate rc;
    rc.item_id = c.at("item_id");
    rc.distance = c.at("distance");
    if (!c.at("compat").is_null()) rc.compat = c.at("compat").get<double>();
    rc.rank = c.at("rank_score");
    s.top.push_back(std::move(rc));
  }
  return s;
}

json to_json(const PartialOutfit& p) {
  return {{"slots", p.slots}, {"filled", p.filled}, {"locked", p.locked}};
}

PartialOutfit partial_outfit_from_json(const json& j) {
  PartialOutfit p;
  p.slots = j.at("slots").get<std::vector<std::string>>();
  p.filled = j.at("filled").get<std::map<std::string, std::string>>();
  p.locked = j.at("locked").get<std::set<std::string>>();
  return p;
}

}  // namespace outfit

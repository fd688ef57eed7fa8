#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "outfit/model.hpp"
#include "outfit/rng.hpp"

namespace outfit {

enum class Sampling { kGreedy, kUniform, kBiased };
std::string_view to_string(Sampling sampling);
Sampling parse_sampling(std::string_view name);

struct GenerationConfig {
  int k = 10;
  Sampling sampling = Sampling::kBiased;
  CompatMode compat_mode = CompatMode::kCat;
  std::uint64_t seed = 0;
};

/// Desired slot types plus the items placed so far. Slot types are distinct.
struct PartialOutfit {
  std::vector<std::string> slots;
  std::map<std::string, std::string> filled;  // slot type -> item id
  std::set<std::string> locked;               // user-fixed slots

  std::vector<std::string> unfilled() const;
  bool complete() const { return unfilled().empty(); }
  bool contains_item(const std::string& id) const;
  /// Throws kConfig when filled/locked are not subsets of slots/filled.
  void validate() const;
};

struct RankedCandidate {
  std::string item_id;
  double distance = 0.0;          // |q - u_x|
  std::optional<double> compat;   // c_x; absent for an empty outfit
  double rank = 0.0;              // r_x
};

/// Candidate item columns per type, over one encoded catalog.
using CandidatePools = std::map<std::string, std::vector<Eigen::Index>>;
CandidatePools pools_by_type(const EncodedItems& items);

/// Everything the procedure reads; all of it is immutable.
struct GenerationContext {
  const Model& model;
  const EncodedItems& items;
  const CandidatePools& pools;
};

/// Unfilled type whose pool has the smallest mean |q - u_x|; ties go to the
/// lexicographically smallest name. nullopt once every slot is filled.
std::optional<std::string> select_next_slot(const PartialOutfit& partial, const Vector& q, const EncodedItems& items,
                                            const CandidatePools& pools);

/// Sorts ascending by rank, ties by item_id.
void order_candidates(std::vector<RankedCandidate>& ranked);

/// r_x = |q - u_x| for an empty outfit, else |q - u_x| / c_x with c_x the mean
/// compatibility to the filled items. Items already in the outfit are skipped.
std::vector<RankedCandidate> rank_candidates(const PartialOutfit& partial, const Vector& q, const std::string& type,
                                             const GenerationContext& ctx, CompatMode mode);

/// Compatibility-only ranking: r_x = 1 / c_x.
std::vector<RankedCandidate> rank_by_compatibility(const PartialOutfit& partial, const std::string& type,
                                                   const GenerationContext& ctx, CompatMode mode);

/// Selection probabilities over the top min(k, n) entries (zero beyond).
std::vector<double> sampling_probabilities(std::span<const RankedCandidate> ranked, const GenerationConfig& config);

std::string sample_from_ranked(std::span<const RankedCandidate> ranked, const GenerationConfig& config, Rng& rng);

/// RNG for the step that fills the n-th traced slot.
Rng step_rng(std::uint64_t seed, std::size_t step_index);

inline constexpr std::size_t kTraceDepth = 20;

struct TraceStep {
  std::string type;
  std::vector<RankedCandidate> top;  // first kTraceDepth of the ranking
  std::string chosen;
  Sampling sampling = Sampling::kBiased;
  bool user_choice = false;
};

struct GenerationResult {
  PartialOutfit outfit;
  std::vector<TraceStep> trace;

  /// Item ids in slot order.
  std::vector<std::string> item_ids() const;
};

/// Runs select -> rank -> sample until every slot is filled. Starting items
/// in `start` are kept and never resampled.
GenerationResult generate_outfit(const Vector& q, const PartialOutfit& start, const GenerationContext& ctx,
                                 const GenerationConfig& config);

/// Same loop without the query term, seeded with one item; slots are filled
/// in the given order.
GenerationResult baseline_generate(const std::string& seed_item, const std::vector<std::string>& slots,
                                   const GenerationContext& ctx, const GenerationConfig& config);

/// One automatic step on `partial`. Returns the appended trace entry.
TraceStep auto_step(PartialOutfit& partial, const Vector& q, const GenerationContext& ctx,
                    const GenerationConfig& config, std::size_t step_index);

/// Re-executes a trace from its starting outfit. Automatic steps are
/// recomputed and must reproduce the recorded choice (kIntegrity otherwise);
/// user choices are applied as recorded.
PartialOutfit replay_trace(const PartialOutfit& start, std::span<const TraceStep> trace, const Vector& q,
                           const GenerationContext& ctx, const GenerationConfig& config);

nlohmann::json to_json(const RankedCandidate& c);
nlohmann::json to_json(const TraceStep& step);
TraceStep trace_step_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PartialOutfit& p);
PartialOutfit partial_outfit_from_json(const nlohmann::json& j);

}  // namespace outfit

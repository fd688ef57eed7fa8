#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "outfit/catalog.hpp"
#include "outfit/generation.hpp"
#include "outfit/model.hpp"

namespace outfit {

/// Score of an unordered item pair, in [0, 1].
using PairScorer = std::function<double(const std::string&, const std::string&)>;

PairScorer model_scorer(const Model& model, const EncodedItems& items, CompatMode mode);

/// Mean pair score over all C(n,2) unordered pairs. Needs n >= 2.
double outfit_score(std::span<const std::string> item_ids, const PairScorer& scorer);

/// Mann-Whitney AUC; ties count one half.
double auc(std::span<const double> positive, std::span<const double> negative);

double compatibility_auc(std::span<const Outfit> positive, std::span<const Outfit> negative, const PairScorer& scorer);

/// `per_outfit` random negatives per positive: every item is replaced by a
/// random item of the same type, and the result never equals a ground-truth
/// outfit.
std::vector<Outfit> make_random_negative_outfits(std::span<const Outfit> positive, const ItemTable& items,
                                                 std::uint64_t seed, int per_outfit = 1);

struct FitbQuestion {
  std::vector<std::string> context;
  std::array<std::string, 4> candidates;
  int answer = 0;
};

/// One question per outfit with >= 2 items: a random item is blanked and
/// joined by three distractors of its type from outside the outfit.
std::vector<FitbQuestion> make_fitb_questions(std::span<const Outfit> outfits, const ItemTable& items,
                                              std::uint64_t seed);

/// Index of the candidate with the highest mean score to the context;
/// ties go to the lowest index.
int fitb_choice(const FitbQuestion& q, const PairScorer& scorer);
double fitb_accuracy(std::span<const FitbQuestion> questions, const PairScorer& scorer);

/// Column mean.
Vector outfit_center(const Batch& vectors);
/// Median item-to-center distance (mean of the middle two for even counts).
double cluster_size(const Batch& vectors);

struct CoherenceRecord {
  Vector q;
  Batch items;  // one embedding per column
  Vector center;
  double size = 0.0;
};

CoherenceRecord make_coherence_record(const Vector& q, const Batch& items);

/// Throws kUndefinedCorrelation when either series is constant.
double pearson(std::span<const double> x, std::span<const double> y);
/// Two-sided t-test of rho = 0 with n - 2 degrees of freedom.
double pearson_p_value(double rho, std::size_t n);
/// Two-sided permutation p: (1 + #{|rho_perm| >= |rho|}) / (1 + permutations).
double permutation_p_value(std::span<const double> x, std::span<const double> y, int permutations,
                           std::uint64_t seed);

struct CoherenceStats {
  double rho = 0.0;
  double p = 1.0;
  std::optional<double> p_permutation;
  double r2 = 0.0;
  std::size_t pairs = 0;
  std::vector<double> d_query;
  std::vector<double> d_center;
};

/// Pearson correlation between query distances and center distances over
/// every unordered pair of records.
CoherenceStats query_coherence(std::span<const CoherenceRecord> records, int permutations = 10000,
                               std::uint64_t seed = 0);

struct CoherenceConfig {
  int n_outfits = 500;
  int k = 10;
  Sampling sampling = Sampling::kBiased;
  CompatMode compat_mode = CompatMode::kCat;
  int permutations = 10000;
  std::uint64_t seed = 0;
};

struct CoherenceReport {
  std::string label;
  double size_baseline = 0.0;   // s_b
  double size_coherent = 0.0;   // s_c
  double mean_d_query = 0.0;    // d_q
  double mean_d_center = 0.0;   // d_c
  CoherenceStats stats;
  std::vector<std::vector<std::string>> outfits;           // coherent outfits
  std::vector<std::vector<std::string>> baseline_outfits;
  std::vector<std::string> queries;
};

/// Generates n outfits from sampled query texts and n baseline outfits from
/// random seed items, all over `candidates`. With n < 3 the correlation
/// statistics are NaN (null in JSON).
CoherenceReport run_coherence_experiment(const Model& model, const EncodedItems& candidates,
                                         std::span<const std::string> query_texts,
                                         const std::vector<std::string>& slots, const CoherenceConfig& config,
                                         const std::string& label = "");

nlohmann::json to_json(const CoherenceReport& report, bool include_outfits = false);
std::string coherence_table(std::span<const CoherenceReport> reports);
std::string coherence_scatter_csv(const CoherenceReport& report);

struct CompatReport {
  CompatMode mode = CompatMode::kCat;
  double auc = 0.0;
  double fitb = 0.0;
  std::size_t outfits = 0;
  std::size_t negatives = 0;
  std::size_t questions = 0;
};

/// With a single negative per outfit, AUC on a 100-outfit split moves by
/// about 0.02 between negative draws.
inline constexpr int kEvalNegativesPerOutfit = 10;

CompatReport evaluate_compatibility(const Model& model, const EncodedItems& encoded, const DatasetSplit& split,
                                    CompatMode mode, std::uint64_t seed,
                                    int negatives_per_outfit = kEvalNegativesPerOutfit);
nlohmann::json to_json(const CompatReport& report);
std::string compat_table(std::span<const CompatReport> reports);

}  // namespace outfit

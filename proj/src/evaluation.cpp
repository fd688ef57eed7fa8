#include "outfit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "outfit/error.hpp"
#include "outfit/rng.hpp"

namespace outfit {

using nlohmann::json;

PairScorer model_scorer(const Model& model, const EncodedItems& items, CompatMode mode) {
  return [&model, &items, mode](const std::string& a, const std::string& b) {
    return model.compatibility(mode, items, items.at(a), items.at(b));
  };
}

double outfit_score(std::span<const std::string> item_ids, const PairScorer& scorer) {
  if (item_ids.size() < 2) throw Error(ErrorKind::kConfig, "outfit score needs at least two items");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < item_ids.size(); ++i) {
    for (std::size_t j = i + 1; j < item_ids.size(); ++j) {
      sum += scorer(item_ids[i], item_ids[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double auc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw Error(ErrorKind::kConfig, "AUC needs positives and negatives");
  // Rank-sum with midranks for ties.
  struct Entry {
    double score;
    bool pos;
  };
  std::vector<Entry> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.push_back({s, true});
  for (double s : negative) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].pos) rank_sum += mid;
    }
    i = j;
  }
  const double np = static_cast<double>(positive.size());
  const double nn = static_cast<double>(negative.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double compatibility_auc(std::span<const Outfit> positive, std::span<const Outfit> negative, const PairScorer& scorer) {
  std::vector<double> pos, neg;
  for (const auto& o : positive) pos.push_back(outfit_score(o.item_ids, scorer));
  for (const auto& o : negative) neg.push_back(outfit_score(o.item_ids, scorer));
  return auc(pos, neg);
}

namespace {

std::vector<std::string> sorted_ids(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

std::vector<Outfit> make_random_negative_outfits(std::span<const Outfit> positive, const ItemTable& items,
                                                 std::uint64_t seed, int per_outfit) {
  if (per_outfit < 1) throw Error(ErrorKind::kConfig, "per_outfit must be at least 1");
  std::set<std::vector<std::string>> truth;
  for (const auto& o : positive) truth.insert(sorted_ids(o.item_ids));
  Rng rng(mix_seed(seed, 0x4e4547ULL));
  std::vector<Outfit> out;
  out.reserve(positive.size() * static_cast<std::size_t>(per_outfit));
  for (int round = 0; round < per_outfit; ++round) {
    const std::string prefix = round == 0 ? "neg-" : "neg" + std::to_string(round) + "-";
    for (const auto& o : positive) {
      Outfit neg;
      neg.outfit_id = prefix + o.outfit_id;
      neg.split = o.split;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        neg.item_ids.clear();
        for (const auto& id : o.item_ids) {
          const auto& pool = items.of_type(items.at(id).semantic_type);
          std::string pick;
          for (int tries = 0; tries < 100; ++tries) {
            pick = items[pool[rng.index(pool.size())]].item_id;
            if (std::find(neg.item_ids.begin(), neg.item_ids.end(), pick) == neg.item_ids.end()) break;
          }
          neg.item_ids.push_back(pick);
        }
        const auto key = sorted_ids(neg.item_ids);
        ok = std::adjacent_find(key.begin(), key.end()) == key.end() && !truth.contains(key);
      }
      if (!ok) {
        throw Error(ErrorKind::kSamplingExhausted, "cannot build a random negative for outfit " + o.outfit_id,
                    {o.outfit_id});
      }
      out.push_back(std::move(neg));
    }
  }
  return out;
}

std::vector<FitbQuestion> make_fitb_questions(std::span<const Outfit> outfits, const ItemTable& items,
                                              std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x46495442ULL));
  std::vector<FitbQuestion> out;
  for (const auto& o : outfits) {
    if (o.item_ids.size() < 2) continue;
    const std::size_t blank = rng.index(o.item_ids.size());
    const auto& answer = o.item_ids[blank];
    std::vector<std::string> pool;
    for (std::size_t idx : items.of_type(items.at(answer).semantic_type)) {
      const auto& id = items[idx].item_id;
      if (std::find(o.item_ids.begin(), o.item_ids.end(), id) == o.item_ids.end()) pool.push_back(id);
    }
    if (pool.size() < 3) continue;
    FitbQuestion q;
    for (std::size_t i = 0; i < o.item_ids.size(); ++i) {
      if (i != blank) q.context.push_back(o.item_ids[i]);
    }
    // Partial Fisher-Yates for three distinct distractors.
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t j = i + rng.index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    q.answer = static_cast<int>(rng.index(4));
    std::size_t next = 0;
    for (int c = 0; c < 4; ++c) q.candidates[static_cast<std::size_t>(c)] = c == q.answer ? answer : pool[next++];
    out.push_back(std::move(q));
  }
  return out;
}

int fitb_choice(const FitbQuestion& q, const PairScorer& scorer) {
  int best = 0;
  double best_score = -1.0;
  for (int c = 0; c < 4; ++c) {
    double s = 0.0;
    for (const auto& ctx : q.context) s += scorer(q.candidates[static_cast<std::size_t>(c)], ctx);
    s /= static_cast<double>(std::max<std::size_t>(q.context.size(), 1));
    if (s > best_score) {
      best = c;
      best_score = s;
    }
  }
  return best;
}

double fitb_accuracy(std::span<const FitbQuestion> questions, const PairScorer& scorer) {
  if (questions.empty()) throw Error(ErrorKind::kConfig, "no FITB questions");
  std::size_t correct = 0;
  for (const auto& q : questions) correct += fitb_choice(q, scorer) == q.answer ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(questions.size());
}

Vector outfit_center(const Batch& vectors) {
  if (vectors.cols() == 0) throw Error(ErrorKind::kShape, "outfit center of an empty set");
  return vectors.rowwise().mean();
}

double cluster_size(const Batch& vectors) {
  const Vector c = outfit_center(vectors);
  std::vector<double> d(static_cast<std::size_t>(vectors.cols()));
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) d[static_cast<std::size_t>(j)] = (vectors.col(j) - c).norm();
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  return n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

CoherenceRecord make_coherence_record(const Vector& q, const Batch& items) {
  CoherenceRecord r;
  r.q = q;
  r.items = items;
  r.center = outfit_center(items);
  r.size = cluster_size(items);
  return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::kShape, "pearson: series lengths differ");
  if (x.size() < 2) throw Error(ErrorKind::kUndefinedCorrelation, "pearson needs at least two points");
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  if (*xmin == *xmax || *ymin == *ymax) {
    throw Error(ErrorKind::kUndefinedCorrelation, "correlation is undefined for a constant series");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson_p_value(double rho, std::size_t n) {
  if (n < 3) throw Error(ErrorKind::kUndefinedCorrelation, "p-value needs at least three pairs");
  const double df = static_cast<double>(n - 2);
  if (std::abs(rho) >= 1.0) return 0.0;
  const double t = rho * std::sqrt(df / (1.0 - rho * rho));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double permutation_p_value(std::span<const double> x, std::span<const double> y, int permutations,
                           std::uint64_t seed) {
  const double observed = std::abs(pearson(x, y));
  std::vector<int> hits(static_cast<std::size_t>(permutations), 0);
  const std::vector<double> base(y.begin(), y.end());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < permutations; ++i) {
    std::vector<double> shuffled = base;
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    rng.shuffle(shuffled);
    hits[static_cast<std::size_t>(i)] = std::abs(pearson(x, shuffled)) >= observed ? 1 : 0;
  }
  long total = 0;
  for (int h : hits) total += h;
  return (1.0 + static_cast<double>(total)) / (1.0 + static_cast<double>(permutations));
}

CoherenceStats query_coherence(std::span<const CoherenceRecord> records, int permutations, std::uint64_t seed) {
  if (records.size() < 3) throw Error(ErrorKind::kConfig, "query coherence needs at least three records");
  CoherenceStats s;
  for (std::size_t a = 0; a < records.size(); ++a) {
    for (std::size_t b = a + 1; b < records.size(); ++b) {
      s.d_query.push_back((records[a].q - records[b].q).norm());
      s.d_center.push_back((records[a].center - records[b].center).norm());
    }
  }
  s.pairs = s.d_query.size();
  s.rho = pearson(s.d_query, s.d_center);
  s.r2 = s.rho * s.rho;
  s.p = pearson_p_value(s.rho, s.pairs);
  if (permutations > 0) s.p_permutation = permutation_p_value(s.d_query, s.d_center, permutations, seed);
  return s;
}

namespace {

Batch outfit_embeddings(const EncodedItems& items, const std::vector<std::string>& ids) {
  Batch out(items.u_image.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = items.embedding(items.at(ids[j]));
  return out;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

CoherenceReport run_coherence_experiment(const Model& model, const EncodedItems& candidates,
                                         std::span<const std::string> query_texts,
                                         const std::vector<std::string>& slots, const CoherenceConfig& config,
                                         const std::string& label) {
  if (config.n_outfits < 1) throw Error(ErrorKind::kConfig, "n_outfits must be positive");
  if (query_texts.empty()) throw Error(ErrorKind::kConfig, "no query texts");
  const CandidatePools pools = pools_by_type(candidates);
  const GenerationContext ctx{model, candidates, pools};
  CoherenceReport report;
  report.label = label;

  // Queries drawn without replacement while the source lasts.
  Rng qrng(mix_seed(config.seed, 0x51ULL));
  std::vector<std::size_t> order(query_texts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  qrng.shuffle(order);

  std::vector<CoherenceRecord> records;
  std::vector<double> coherent_sizes, baseline_sizes;
  for (int n = 0; n < config.n_outfits; ++n) {
    const std::string& text = query_texts[order[static_cast<std::size_t>(n) % order.size()]];
    const Vector q = model.embed_query(text);
    GenerationConfig gc{config.k, config.sampling, config.compat_mode, mix_seed(config.seed, 1000 + n)};
    PartialOutfit start;
    start.slots = slots;
    const auto result = generate_outfit(q, start, ctx, gc);
    const auto ids = result.item_ids();
    records.push_back(make_coherence_record(q, outfit_embeddings(candidates, ids)));
    coherent_sizes.push_back(records.back().size);
    report.queries.push_back(text);
    report.outfits.push_back(ids);
  }
  Rng brng(mix_seed(config.seed, 0x42ULL));
  for (int n = 0; n < config.n_outfits; ++n) {
    // Seed items come from the slot types so the baseline fills the same slots.
    std::vector<Eigen::Index> eligible;
    for (const auto& s : slots) {
      auto it = pools.find(s);
      if (it != pools.end()) eligible.insert(eligible.end(), it->second.begin(), it->second.end());
    }
    if (eligible.empty()) throw Error(ErrorKind::kPool, "no candidates for the requested slots");
    const auto seed_item = candidates.ids[static_cast<std::size_t>(eligible[brng.index(eligible.size())])];
    GenerationConfig gc{config.k, config.sampling, config.compat_mode, mix_seed(config.seed, 5000 + n)};
    const auto result = baseline_generate(seed_item, slots, ctx, gc);
    const auto ids = result.item_ids();
    baseline_sizes.push_back(cluster_size(outfit_embeddings(candidates, ids)));
    report.baseline_outfits.push_back(ids);
  }
  report.size_coherent = mean_of(coherent_sizes);
  report.size_baseline = mean_of(baseline_sizes);
  if (records.size() >= 3) {
    report.stats = query_coherence(records, config.permutations, mix_seed(config.seed, 0x50ULL));
  } else {
    // Too few pairs for a correlation: distances only, statistics left undefined.
    auto& s = report.stats;
    if (records.size() == 2) {
      s.d_query.push_back((records[0].q - records[1].q).norm());
      s.d_center.push_back((records[0].center - records[1].center).norm());
    }
    s.pairs = s.d_query.size();
    s.rho = s.p = s.r2 = std::nan("");
  }
  report.mean_d_query = mean_of(report.stats.d_query);
  report.mean_d_center = mean_of(report.stats.d_center);
  return report;
}

json to_json(const CoherenceReport& r, bool include_outfits) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j = {{"label", r.label},
            {"s_b", r.size_baseline},
            {"s_c", r.size_coherent},
            {"d_q", r.mean_d_query},
            {"d_c", r.mean_d_center},
            {"rho", num(r.stats.rho)},
            {"p", num(r.stats.p)},
            {"p_permutation", r.stats.p_permutation ? json(*r.stats.p_permutation) : json(nullptr)},
            {"r2", num(r.stats.r2)},
            {"pairs", r.stats.pairs},
            {"n_outfits", r.outfits.size()}};
  if (include_outfits) {
    j["outfits"] = r.outfits;
    j["baseline_outfits"] = r.baseline_outfits;
    j["queries"] = r.queries;
  }
  return j;
}

std::string coherence_table(std::span<const CoherenceReport> reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %8s %8s %10s %10s %8s\n", "run", "s_b", "s_c", "d_q", "d_c",
                "rho", "p", "p_perm", "R2");
  os << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-10s %8.3f %8.3f %8.3f %8.3f %8.3f %10.3g %10.3g %8.3f\n", r.label.c_str(),
                  r.size_baseline, r.size_coherent, r.mean_d_query, r.mean_d_center, r.stats.rho, r.stats.p,
                  r.stats.p_permutation.value_or(std::nan("")), r.stats.r2);
    os << line;
  }
  return os.str();
}

std::string coherence_scatter_csv(const CoherenceReport& report) {
  std::ostringstream os;
  os << "d_q,d_c\n";
  char line[64];
  for (std::size_t i = 0; i < report.stats.d_query.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", report.stats.d_query[i], report.stats.d_center[i]);
    os << line;
  }
  return os.str();
}

CompatReport evaluate_compatibility(const Model& model, const EncodedItems& encoded, const DatasetSplit& split,
                                    CompatMode mode, std::uint64_t seed, int negatives_per_outfit) {
  const auto scorer = model_scorer(model, encoded, mode);
  const auto negatives = make_random_negative_outfits(split.outfits, split.items, seed, negatives_per_outfit);
  const auto questions = make_fitb_questions(split.outfits, split.items, seed);
  CompatReport r;
  r.mode = mode;
  r.auc = compatibility_auc(split.outfits, negatives, scorer);
  r.fitb = questions.empty() ? 0.0 : fitb_accuracy(questions, scorer);
  r.outfits = split.outfits.size();
  r.negatives = negatives.size();
  r.questions = questions.size();
  return r;
}

json to_json(const CompatReport& r) {
  return {{"mode", std::string(to_string(r.mode))},
          {"auc", r.auc},
          {"fitb", r.fitb},
          {"outfits", r.outfits},
          {"negatives", r.negatives},
          {"questions", r.questions}};
}

std::string compat_table(std::span<const CompatReport> reports) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-6s %8s %8s %8s %9s\n", "mode", "AUC", "FITB", "outfits", "questions");
  os << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-6s %8.3f %8.1f %8zu %9zu\n", std::string(to_string(r.mode)).c_str(), r.auc,
                  100.0 * r.fitb, r.outfits, r.questions);
    os << line;
  }
  return os.str();
}

}  // namespace outfit

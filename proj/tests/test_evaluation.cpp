#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <set>

#include "outfit/error.hpp"
#include "outfit/evaluation.hpp"
#include "support.hpp"

using namespace outfit;

namespace {

// n outfits of three items each; no item is shared between outfits.
DatasetSplit disjoint_split(int n) {
  DatasetSplit s;
  const char* types[] = {"tops", "bottoms", "shoes"};
  for (int o = 0; o < n; ++o) {
    Outfit out;
    out.outfit_id = "o" + std::to_string(o);
    for (const char* t : types) {
      FashionItem it;
      it.item_id = std::string(t) + "-" + std::to_string(o);
      it.semantic_type = t;
      s.items.add(it);
      out.item_ids.push_back(it.item_id);
    }
    s.outfits.push_back(out);
  }
  return s;
}

// 1 when both items come from the same ground-truth outfit.
PairScorer membership_scorer() {
  return [](const std::string& a, const std::string& b) {
    return a.substr(a.find('-')) == b.substr(b.find('-')) ? 1.0 : 0.0;
  };
}

double auc_oracle(const std::vector<double>& pos, const std::vector<double>& neg) {
  double s = 0;
  for (double p : pos) {
    for (double n : neg) s += p > n ? 1.0 : p == n ? 0.5 : 0.0;
  }
  return s / static_cast<double>(pos.size() * neg.size());
}

// Two-sided Student t tail by Simpson integration of the density.
double t_two_sided_oracle(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 200000;
  const double h = std::fabs(t) / n;
  double s = pdf(0) + pdf(std::fabs(t));
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
  return 1.0 - 2.0 * s * h / 3.0;
}

Matrix random_rotation(Rng& rng, int d) {
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  return Eigen::HouseholderQR<Matrix>(a).householderQ();
}

}  // namespace

TEST_CASE("auc") {
  const std::vector<double> hi = {0.8, 0.9}, lo = {0.1, 0.2, 0.3};
  CHECK(auc(hi, lo) == 1.0);
  CHECK(auc(lo, hi) == 0.0);
  const std::vector<double> same = {0.4, 0.4};
  CHECK(auc(same, same) == 0.5);
  const std::vector<double> p = {0.5, 0.8}, n = {0.5, 0.2};
  CHECK(auc(p, n) == doctest::Approx(0.875).epsilon(1e-15));
  CHECK_THROWS_AS(auc(p, std::vector<double>{}), Error);

  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> pos(1 + rng.index(40)), neg(1 + rng.index(40));
    for (auto& v : pos) v = std::round(10 * rng.uniform()) / 10;
    for (auto& v : neg) v = std::round(8 * rng.uniform()) / 10;
    const double a = auc(pos, neg);
    CHECK(a == doctest::Approx(auc_oracle(pos, neg)).epsilon(1e-12));
    std::vector<double> np, nn;
    for (double v : pos) np.push_back(-v);
    for (double v : neg) nn.push_back(-v);
    CHECK(a + auc(np, nn) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("a random scorer separates nothing") {
  const auto ds = [] {
    auto c = testing::small_synthetic(11);
    c.items_per_theme = 40;
    c.n_outfits = 500;
    return generate_synthetic_dataset(c);
  }();
  const auto neg = make_random_negative_outfits(ds.train.outfits, ds.train.items, 2);
  REQUIRE(neg.size() == 500);
  auto rng = std::make_shared<Rng>(5);
  const PairScorer coin = [rng](const std::string&, const std::string&) { return rng->uniform(); };
  CHECK(std::fabs(compatibility_auc(ds.train.outfits, neg, coin) - 0.5) < 0.03);
}

TEST_CASE("outfit_score averages all unordered pairs") {
  std::map<std::pair<std::string, std::string>, double> table;
  Rng rng(2);
  const std::vector<std::string> ids = {"a", "b", "c", "d", "e"};
  for (const auto& x : ids) {
    for (const auto& y : ids) table[{std::min(x, y), std::max(x, y)}] = rng.uniform();
  }
  const PairScorer s = [&](const std::string& x, const std::string& y) { return table.at({std::min(x, y), std::max(x, y)}); };
  double sum = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (i < j) {
        sum += s(ids[i], ids[j]);
        ++pairs;
      }
    }
  }
  CHECK(pairs == 10);
  CHECK(outfit_score(ids, s) == doctest::Approx(sum / pairs).epsilon(1e-14));
  const std::vector<std::string> one = {"a"};
  CHECK_THROWS_AS(outfit_score(one, s), Error);
}

TEST_CASE("random negative outfits") {
  const auto ds = generate_synthetic_dataset(testing::small_synthetic(3));
  const auto& split = ds.train;
  std::set<std::vector<std::string>> truth;
  for (const auto& o : split.outfits) {
    auto k = o.item_ids;
    std::sort(k.begin(), k.end());
    truth.insert(k);
  }
  const auto neg = make_random_negative_outfits(split.outfits, split.items, 4);
  REQUIRE(neg.size() == split.outfits.size());
  for (std::size_t i = 0; i < neg.size(); ++i) {
    auto k = neg[i].item_ids;
    std::sort(k.begin(), k.end());
    CHECK_FALSE(truth.contains(k));
    CHECK(std::adjacent_find(k.begin(), k.end()) == k.end());
    REQUIRE(neg[i].item_ids.size() == split.outfits[i].item_ids.size());
    for (std::size_t j = 0; j < neg[i].item_ids.size(); ++j) {
      CHECK(split.items.at(neg[i].item_ids[j]).semantic_type ==
            split.items.at(split.outfits[i].item_ids[j]).semantic_type);
    }
  }
  const auto again = make_random_negative_outfits(split.outfits, split.items, 4);
  for (std::size_t i = 0; i < neg.size(); ++i) CHECK(again[i].item_ids == neg[i].item_ids);

  // A membership oracle scores every positive 1 and every negative at most 1/3.
  const auto d = disjoint_split(50);
  const auto dn = make_random_negative_outfits(d.outfits, d.items, 1);
  CHECK(compatibility_auc(d.outfits, dn, membership_scorer()) == 1.0);

  // Several rounds per positive: the first round matches the single draw and ids stay unique.
  const auto multi = make_random_negative_outfits(split.outfits, split.items, 4, 3);
  REQUIRE(multi.size() == 3 * split.outfits.size());
  std::set<std::string> ids;
  for (std::size_t i = 0; i < multi.size(); ++i) {
    ids.insert(multi[i].outfit_id);
    auto k = multi[i].item_ids;
    std::sort(k.begin(), k.end());
    CHECK_FALSE(truth.contains(k));
    if (i < neg.size()) CHECK(multi[i].item_ids == neg[i].item_ids);
  }
  CHECK(ids.size() == multi.size());
  CHECK_THROWS_AS(make_random_negative_outfits(split.outfits, split.items, 4, 0), Error);
}

TEST_CASE("fill in the blank") {
  const auto d = disjoint_split(5000);
  const auto qs = make_fitb_questions(d.outfits, d.items, 9);
  REQUIRE(qs.size() == 5000);
  std::array<int, 4> answers{};
  for (const auto& q : qs) {
    CHECK(q.context.size() == 2);
    const auto& ans = q.candidates[static_cast<std::size_t>(q.answer)];
    const std::string type = d.items.at(ans).semantic_type;
    std::set<std::string> distinct(q.candidates.begin(), q.candidates.end());
    CHECK(distinct.size() == 4);
    for (const auto& c : q.candidates) {
      CHECK(d.items.at(c).semantic_type == type);
      CHECK(std::find(q.context.begin(), q.context.end(), c) == q.context.end());
    }
    ++answers[static_cast<std::size_t>(q.answer)];
  }
  for (int a : answers) CHECK(std::fabs(a / 5000.0 - 0.25) < 0.03);

  CHECK(fitb_accuracy(qs, membership_scorer()) == 1.0);
  auto rng = std::make_shared<Rng>(77);
  const PairScorer coin = [rng](const std::string&, const std::string&) { return rng->uniform(); };
  CHECK(std::fabs(fitb_accuracy(qs, coin) - 0.25) < 0.02);
  // Constant scores resolve to the first candidate.
  CHECK(fitb_choice(qs[0], [](const std::string&, const std::string&) { return 0.5; }) == 0);
}

TEST_CASE("outfit center and cluster size") {
  Batch square(2, 4);
  square << 0, 2, 0, 2, 0, 0, 2, 2;
  CHECK(outfit_center(square).isApprox(Vector::Ones(2)));
  CHECK(std::fabs(cluster_size(square) - std::sqrt(2.0)) < 1e-12);

  Batch tri(2, 3);
  tri << 0, 2, 1, 0, 0, 3;
  CHECK((outfit_center(tri) - Vector::Ones(2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::fabs(cluster_size(tri) - std::sqrt(2.0)) < 1e-12);
  CHECK(cluster_size(Batch::Constant(3, 4, 0.7)) == 0.0);

  Batch odd(1, 3);
  odd << 0, 1, 5;  // center 2, distances 2 1 3
  CHECK(cluster_size(odd) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(outfit_center(Batch(3, 0)), Error);

  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(rng.index(8));
    const Batch x = testing::random_batch(rng, 6, n);
    const Matrix r = random_rotation(rng, 6);
    const Vector shift = testing::random_vector(rng, 6, 10.0);
    const Batch y = (r * x).colwise() + shift;
    CHECK(std::fabs(cluster_size(y) - cluster_size(x)) < 1e-9);
    CHECK((outfit_center(y) - (r * outfit_center(x) + shift)).norm() < 1e-9);
  }
}

TEST_CASE("pearson and p-values") {
  std::vector<double> x(30), y(30), z(30);
  Rng rng(12);
  for (std::size_t i = 0; i < 30; ++i) {
    x[i] = rng.normal();
    y[i] = 3 * x[i] - 1;
    z[i] = -0.5 * x[i] + 2;
  }
  CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == 1.0);
  CHECK(pearson(x, z) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(pearson_p_value(pearson(x, y), 30) < 1e-12);

  const std::vector<double> flat(30, 2.0);
  try {
    pearson(x, flat);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUndefinedCorrelation);
  }
  CHECK_THROWS_AS(pearson(x, std::vector<double>(3, 1.0)), Error);

  for (auto [rho, n] : {std::pair{0.5, 10}, std::pair{0.1, 200}, std::pair{-0.3, 40}}) {
    const double df = n - 2.0;
    const double t = rho * std::sqrt(df / (1 - rho * rho));
    CHECK(pearson_p_value(rho, n) == doctest::Approx(t_two_sided_oracle(t, df)).epsilon(1e-7));
  }

  std::vector<double> noise(30);
  for (auto& v : noise) v = rng.normal();
  CHECK(permutation_p_value(x, noise, 2000, 5) > 0.1);
  CHECK(permutation_p_value(x, y, 999, 5) == doctest::Approx(1.0 / 1000));
  CHECK(permutation_p_value(x, noise, 500, 5) == permutation_p_value(x, noise, 500, 5));
}

TEST_CASE("query coherence over records") {
  Rng rng(8);
  std::vector<CoherenceRecord> recs;
  for (int i = 0; i < 12; ++i) {
    const Vector q = testing::random_vector(rng, 4);
    // Items clustered around 2q, so center distances are twice query distances.
    Batch items = (testing::random_batch(rng, 4, 3, 0.01)).colwise() + 2 * q;
    items.col(2) = 3 * 2 * q - items.col(0) - items.col(1);
    recs.push_back(make_coherence_record(q, items));
  }
  const auto s = query_coherence(recs, 200, 1);
  CHECK(s.pairs == 66);
  CHECK(s.rho == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.d_center[7] == doctest::Approx(2 * s.d_query[7]).epsilon(1e-9));
  REQUIRE(s.p_permutation.has_value());
  CHECK(*s.p_permutation == doctest::Approx(1.0 / 201));
  CHECK_FALSE(query_coherence(recs, 0, 1).p_permutation.has_value());
  recs.resize(2);
  CHECK_THROWS_AS(query_coherence(recs), Error);
}

TEST_CASE("coherence experiment smoke run") {
  Model model(testing::small_model_config(), 2);
  const auto ds = generate_synthetic_dataset(testing::small_synthetic(2));
  const auto enc = model.encode(ds.test.items);
  std::vector<std::string> texts;
  for (const auto& it : ds.test.items) texts.push_back(it.text());
  CoherenceConfig cfg;
  cfg.n_outfits = 4;
  cfg.k = 3;
  cfg.permutations = 50;
  const std::vector<std::string> slots = {"tops", "bottoms", "shoes"};
  const auto r = run_coherence_experiment(model, enc, texts, slots, cfg, "smoke");
  CHECK(r.outfits.size() == 4);
  CHECK(r.baseline_outfits.size() == 4);
  CHECK(r.stats.pairs == 6);
  CHECK(r.size_baseline > 0);
  CHECK(r.size_coherent > 0);
  for (const auto& o : r.outfits) CHECK(o.size() == 3);
  const auto again = run_coherence_experiment(model, enc, texts, slots, cfg, "smoke");
  CHECK(again.outfits == r.outfits);
  CHECK(again.stats.rho == r.stats.rho);
  CHECK(to_json(r)["n_outfits"] == 4);
  CHECK(coherence_scatter_csv(r).rfind("d_q,d_c\n", 0) == 0);

  cfg.n_outfits = 2;
  const auto two = to_json(run_coherence_experiment(model, enc, texts, slots, cfg));
  for (const char* key : {"label", "s_b", "s_c", "d_q", "d_c", "rho", "p", "p_permutation", "r2", "pairs", "n_outfits"}) {
    CHECK(two.contains(key));
  }
  CHECK(two["pairs"] == 1);
  CHECK(two["rho"].is_null());
  CHECK(two["s_b"].get<double>() > 0);
  cfg.n_outfits = 0;
  CHECK_THROWS_AS(run_coherence_experiment(model, enc, texts, slots, cfg), Error);
}

TEST_CASE("untrained compatibility is near chance") {
  Model model(testing::small_model_config(), 7);
  auto sc = testing::small_synthetic(7);
  sc.n_test_outfits = 300;
  const auto ds = generate_synthetic_dataset(sc);
  const auto enc = model.encode(ds.test.items);
  for (CompatMode mode : {CompatMode::kCat, CompatMode::kImage, CompatMode::kText}) {
    const auto r = evaluate_compatibility(model, enc, ds.test, mode, 1);
    CHECK(r.outfits == 300);
    CHECK(r.auc > 0.3);
    CHECK(r.auc < 0.7);
  }
}

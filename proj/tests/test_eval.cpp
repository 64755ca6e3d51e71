#include <doctest.h>

#include <random>
#include <set>

#include "hndr/error.hpp"
#include "hndr/eval.hpp"
#include "oracles.hpp"

using namespace hndr;
using Eigen::MatrixXd;

namespace {

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Both classes present; scores drawn from a small grid so ties are common.
Instance random_instance(std::mt19937_64& gen, std::size_t n, bool ties) {
  std::uniform_int_distribution<int> grid(0, 9);
  std::normal_distribution<double> cont;
  std::bernoulli_distribution coin(0.4);
  Instance in;
  for (std::size_t i = 0; i < n; ++i) {
    in.labels.push_back(coin(gen) ? 1 : 0);
    in.scores.push_back(ties ? grid(gen) / 10.0 : cont(gen) + 0.5 * in.labels.back());
  }
  in.labels[0] = 1;
  in.labels[1] = 0;
  return in;
}

}  // namespace

TEST_CASE("fold plans") {
  const auto plan = make_folds(10, 5, 1, 3);
  REQUIRE(plan.assignments.size() == 1);
  std::vector<int> sizes(5, 0);
  for (auto f : plan.assignments[0]) sizes[f]++;
  for (int s : sizes) CHECK(s == 2);

  CHECK(make_folds(10, 5, 1, 3).assignments == plan.assignments);
  CHECK(make_folds(10, 5, 1, 4).assignments != plan.assignments);

  const auto ten = make_folds(37, 5, 10, 8);
  CHECK(ten.assignments.size() * static_cast<std::size_t>(ten.k) == 50);
  for (const auto& a : ten.assignments) {
    std::vector<int> s(5, 0);
    for (auto f : a) {
      REQUIRE(f < 5);
      s[f]++;
    }
    CHECK(*std::max_element(s.begin(), s.end()) - *std::min_element(s.begin(), s.end()) <= 1);
  }
  CHECK(ten.assignments[0] != ten.assignments[1]);
  CHECK_THROWS_AS(make_folds(4, 5, 1, 0), ValidationError);
  CHECK_THROWS_AS(make_folds(10, 1, 1, 0), ValidationError);
}

TEST_CASE("auroc examples") {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.6};
  CHECK(auroc(s, std::vector<int>{1, 0, 1, 0}) == 0.75);
  CHECK(auroc(s, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(auroc(std::vector<double>(6, 0.3), std::vector<int>{1, 0, 1, 0, 0, 1}) == 0.5);
  CHECK_THROWS_AS(auroc(s, std::vector<int>{1, 1, 1, 1}), ValidationError);
  CHECK_THROWS_AS(auroc(s, std::vector<int>{1, 0, 2, 0}), ValidationError);
  CHECK_THROWS_AS(auroc(s, std::vector<int>{1, 0}), ValidationError);
}

TEST_CASE("aupr examples") {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.6, 0.5};
  CHECK(aupr(s, std::vector<int>{1, 1, 0, 0, 0}) == 1.0);
  CHECK(aupr(s, std::vector<int>{0, 0, 0, 0, 1}) == doctest::Approx(0.2).epsilon(1e-15));
  const std::vector<double> six{0.9, 0.8, 0.8, 0.5, 0.4, 0.1};
  const std::vector<int> y{1, 0, 1, 0, 1, 0};
  CHECK(std::abs(aupr(six, y) - oracle::aupr_sweep(six, y)) <= 1e-12);
  CHECK_THROWS_AS(aupr(s, std::vector<int>{0, 0, 0, 0, 0}), ValidationError);
}

TEST_CASE("metrics match the oracles on random instances") {
  std::mt19937_64 gen(12);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(gen() % 199);
    const auto in = random_instance(gen, n, t % 2 == 0);
    CHECK(auroc(in.scores, in.labels) == oracle::auroc_pairs(in.scores, in.labels));
    CHECK(std::abs(aupr(in.scores, in.labels) - oracle::aupr_sweep(in.scores, in.labels)) <= 1e-12);
  }
}

TEST_CASE("metrics are invariant under increasing transforms") {
  std::mt19937_64 gen(13);
  for (int t = 0; t < 50; ++t) {
    const auto in = random_instance(gen, 60, t % 2 == 0);
    std::vector<double> tr;
    for (double v : in.scores) tr.push_back(std::exp(3.0 * v) + 7.0);
    CHECK(auroc(tr, in.labels) == auroc(in.scores, in.labels));
    CHECK(aupr(tr, in.labels) == aupr(in.scores, in.labels));
    if (t % 2 == 1) {
      std::vector<double> neg;
      for (double v : in.scores) neg.push_back(-v);
      CHECK(std::abs(auroc(in.scores, in.labels) + auroc(neg, in.labels) - 1.0) <= 1e-15);
    }
  }
}

TEST_CASE("curves") {
  const std::vector<double> s{0.9, 0.8, 0.8, 0.1};
  const std::vector<int> y{1, 0, 1, 0};
  const auto roc = roc_curve(s, y);
  REQUIRE(roc.size() == 4);
  CHECK(std::isinf(roc.front().threshold));
  CHECK(roc.front().x == 0.0);
  CHECK(roc.front().y == 0.0);
  CHECK(roc.back().x == 1.0);
  CHECK(roc.back().y == 1.0);
  CHECK(roc[2].threshold == 0.8);
  CHECK(roc[2].x == 0.5);
  const auto pr = pr_curve(s, y);
  REQUIRE(pr.size() == 3);
  CHECK(pr[0].x == 0.5);
  CHECK(pr[0].y == 1.0);
  CHECK(pr[1].y == doctest::Approx(2.0 / 3.0));
  CHECK(pr.back().x == 1.0);
}

TEST_CASE("external validation") {
  std::vector<RankedDrug> ranking;
  for (int i = 0; i < 20; ++i) ranking.push_back({"D" + std::to_string(i), 20.0 - i});
  const std::vector<std::string> top{"D0", "D1", "D2"};
  const auto r = external_validate(ranking, top);
  CHECK(r.auroc == 1.0);
  CHECK(r.aupr == 1.0);
  CHECK_THROWS_AS(external_validate(ranking, std::vector<std::string>{"X"}), ValidationError);
  CHECK_THROWS_AS(external_validate(ranking, std::vector<std::string>{}), ValidationError);

  std::mt19937_64 gen(4);
  double total = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::string> ids;
    for (int i = 0; i < 20; ++i) ids.push_back("D" + std::to_string(i));
    std::shuffle(ids.begin(), ids.end(), gen);
    ids.resize(5);
    total += external_validate(ranking, ids).auroc;
  }
  CHECK(std::abs(total / 1000.0 - 0.5) <= 0.05);
}

TEST_CASE("drug aggregation") {
  MatrixXd b(2, 3);
  b << 1, 5, 3, -1, -2, 0;
  CHECK(aggregate_drug_scores(b, DrugAggregation::max) == std::vector<double>{5, 0});
  CHECK(aggregate_drug_scores(b, DrugAggregation::mean) == std::vector<double>{3, -1});
  CHECK_THROWS_AS(aggregate_drug_scores(MatrixXd(2, 0), DrugAggregation::max), ValidationError);
}

TEST_CASE("top-k associations") {
  MatrixXd b(3, 2);
  b << 0.1, 0.9, 0.5, 0.2, 0.3, 0.4;
  const std::vector<std::string> d{"Da", "Db", "Dc"}, p{"P1", "P2"};
  const auto one = top_k_associations(b, d, p, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].drug == "Da");
  CHECK(one[0].protein == "P2");
  const auto all = top_k_associations(b, d, p, 6);
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1].score >= all[i].score);

  // Ties fall back to (drug ID, protein ID) order, not matrix order.
  const std::vector<std::string> d2{"Dz", "Da", "Dm"};
  const auto tied = top_k_associations(MatrixXd::Constant(3, 2, 1.0), d2, p, 4);
  CHECK(tied[0].drug == "Da");
  CHECK(tied[0].protein == "P1");
  CHECK(tied[1].drug == "Da");
  CHECK(tied[1].protein == "P2");
  CHECK(tied[2].drug == "Dm");
  CHECK(tied[3].drug == "Dm");

  CHECK_THROWS_AS(top_k_associations(b, d, p, 0), ValidationError);
  CHECK_THROWS_AS(top_k_associations(b, d, p, 7), ValidationError);
}

TEST_CASE("cross validation on a planted instance") {
  const auto p = oracle::planted_completion(40, 30, 6, 3, 0.15, 21);
  std::vector<Cell> pos;
  for (auto [i, j] : p.positives) pos.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
  CompletionConfig cfg;
  cfg.rank = 3;
  cfg.alpha = 0.5;
  cfg.lambda = 0.1;
  cfg.negative_ratio = 2.0;
  cfg.seed = 5;
  const auto plan = make_folds(pos.size(), 5, 2, 6);
  const auto r1 = cross_validate(pos, 40, 30, p.D, p.P, cfg, plan, 1);
  CHECK(r1.per_fold.size() == 10);
  CHECK(r1.auroc > 0.9);
  double mean = 0.0;
  for (const auto& f : r1.per_fold) mean += f.auroc;
  CHECK(std::abs(mean / 10.0 - r1.auroc) <= 1e-12);
  CHECK(r1.roc.back().x == 1.0);
  CHECK(r1.roc.back().y == 1.0);

  // Results do not depend on how many threads ran the folds.
  const auto r3 = cross_validate(pos, 40, 30, p.D, p.P, cfg, plan, 3);
  CHECK(r3.auroc == r1.auroc);
  CHECK(r3.aupr == r1.aupr);
  CHECK(r3.pooled_auroc == r1.pooled_auroc);

  auto bad = plan;
  bad.assignments[0].pop_back();
  CHECK_THROWS_AS(cross_validate(pos, 40, 30, p.D, p.P, cfg, bad, 1), ValidationError);
}

TEST_CASE("cross validation on shuffled labels is near chance") {
  const auto p = oracle::planted_completion(40, 30, 6, 3, 0.15, 22);
  std::mt19937_64 gen(3);
  std::set<std::pair<std::uint32_t, std::uint32_t>> cells;
  while (cells.size() < p.positives.size())
    cells.insert({static_cast<std::uint32_t>(gen() % 40), static_cast<std::uint32_t>(gen() % 30)});
  std::vector<Cell> pos;
  for (auto [i, j] : cells) pos.push_back({i, j});
  CompletionConfig cfg;
  cfg.rank = 3;
  cfg.seed = 1;
  const auto r = cross_validate(pos, 40, 30, p.D, p.P, cfg, make_folds(pos.size(), 5, 4, 2), 1);
  CHECK(r.auroc > 0.4);
  CHECK(r.auroc < 0.6);
}

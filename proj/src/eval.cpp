#include "hndr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "hndr/error.hpp"
#include "parallel.hpp"
#include "hndr/rng.hpp"

namespace hndr {

using Eigen::Index;
using Eigen::MatrixXd;

FoldPlan make_folds(std::size_t n_positives, int k, int repeats, std::uint64_t seed) {
  if (k < 2) throw ValidationError("fold count must be >= 2");
  if (repeats < 1) throw ValidationError("repeat count must be >= 1");
  if (static_cast<std::size_t>(k) > n_positives) {
    throw ValidationError("fold count " + std::to_string(k) + " exceeds " +
                          std::to_string(n_positives) + " positives");
  }
  FoldPlan plan;
  plan.k = k;
  plan.repeats = repeats;
  plan.seed = seed;
  std::vector<std::uint32_t> perm(n_positives);
  for (int r = 0; r < repeats; ++r) {
    Rng rng = Rng::derive(seed, "folds/" + std::to_string(r));
    std::iota(perm.begin(), perm.end(), 0U);
    rng.shuffle(std::span<std::uint32_t>(perm));
    std::vector<std::uint32_t> assign(n_positives);
    for (std::size_t pos = 0; pos < n_positives; ++pos) {
      assign[perm[pos]] = static_cast<std::uint32_t>(pos % static_cast<std::size_t>(k));
    }
    plan.assignments.push_back(std::move(assign));
  }
  return plan;
}

namespace {

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Counts check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("scores and labels differ in length");
  }
  Counts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ValidationError("non-finite score");
    if (labels[i] == 1) {
      ++c.pos;
    } else if (labels[i] == 0) {
      ++c.neg;
    } else {
      throw ValidationError("labels must be 0 or 1");
    }
  }
  return c;
}

// Indices sorted by score, highest first.
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

// Calls visit(threshold, tp, fp) after each group of tied scores, highest first.
template <typename Visit>
void sweep(std::span<const double> scores, std::span<const int> labels, Visit visit) {
  const auto idx = descending(scores);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double t = scores[idx[i]];
    for (; i < idx.size() && scores[idx[i]] == t; ++i) {
      if (labels[idx[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
    }
    visit(t, tp, fp);
  }
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = check_inputs(scores, labels);
  if (c.pos == 0 || c.neg == 0) throw ValidationError("AUROC needs both positives and negatives");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks are multiples of 0.5, so the rank sum is exact.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    for (; j < idx.size() && scores[idx[j]] == scores[idx[i]]; ++j) pos_in_group += labels[idx[j]] == 1;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += midrank * static_cast<double>(pos_in_group);
    i = j;
  }
  const auto p = static_cast<double>(c.pos), n = static_cast<double>(c.neg);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * n);
}

double aupr(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = check_inputs(scores, labels);
  if (c.pos == 0) throw ValidationError("AUPR needs at least one positive");
  const auto total_pos = static_cast<double>(c.pos);
  double area = 0.0;
  std::size_t prev_tp = 0;
  sweep(scores, labels, [&](double, std::size_t tp, std::size_t fp) {
    if (tp == prev_tp) return;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (static_cast<double>(tp - prev_tp) / total_pos) * precision;
    prev_tp = tp;
  });
  return area;
}

std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = check_inputs(scores, labels);
  if (c.pos == 0 || c.neg == 0) throw ValidationError("ROC curve needs both classes");
  std::vector<CurvePoint> pts{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  sweep(scores, labels, [&](double t, std::size_t tp, std::size_t fp) {
    pts.push_back({t, static_cast<double>(fp) / static_cast<double>(c.neg),
                   static_cast<double>(tp) / static_cast<double>(c.pos)});
  });
  return pts;
}

std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = check_inputs(scores, labels);
  if (c.pos == 0) throw ValidationError("PR curve needs at least one positive");
  std::vector<CurvePoint> pts;
  sweep(scores, labels, [&](double t, std::size_t tp, std::size_t fp) {
    pts.push_back({t, static_cast<double>(tp) / static_cast<double>(c.pos),
                   static_cast<double>(tp) / static_cast<double>(tp + fp)});
  });
  return pts;
}

namespace {

struct FoldResult {
  std::vector<double> scores;
  std::vector<int> labels;
  double auroc = 0.0;
  double aupr = 0.0;
};

}  // namespace

MetricReport cross_validate(std::span<const Cell> positives, std::size_t rows, std::size_t cols,
                            const MatrixXd& raw_drugs, const MatrixXd& raw_proteins,
                            const CompletionConfig& cfg, const FoldPlan& plan, int jobs) {
  cfg.validate();
  if (plan.assignments.size() != static_cast<std::size_t>(plan.repeats)) {
    throw ValidationError("fold plan is missing repeats");
  }
  for (const auto& a : plan.assignments) {
    if (a.size() != positives.size()) {
      throw ValidationError("fold plan covers " + std::to_string(a.size()) + " positives, expected " +
                            std::to_string(positives.size()));
    }
  }
  MatrixXd D = raw_drugs, P = raw_proteins;
  if (cfg.standardize) {
    D = ColumnScaling::fit(raw_drugs).apply(raw_drugs);
    P = ColumnScaling::fit(raw_proteins).apply(raw_proteins);
  }

  const std::size_t n_jobs = static_cast<std::size_t>(plan.repeats) * static_cast<std::size_t>(plan.k);
  std::vector<FoldResult> results(n_jobs);
  detail::run_parallel(n_jobs, jobs, [&](std::size_t job) {
    const int repeat = static_cast<int>(job) / plan.k;
    const int fold = static_cast<int>(job) % plan.k;
    const auto& assign = plan.assignments[static_cast<std::size_t>(repeat)];
    std::vector<Cell> train, test;
    for (std::size_t i = 0; i < positives.size(); ++i) {
      (assign[i] == static_cast<std::uint32_t>(fold) ? test : train).push_back(positives[i]);
    }
    if (test.empty()) {
      throw ValidationError("fold " + std::to_string(fold) + " of repeat " + std::to_string(repeat) +
                            " has no positives");
    }
    const std::string stream = "cv/" + std::to_string(repeat) + "/" + std::to_string(fold);
    Rng rng = Rng::derive(cfg.seed, stream);

    InteractionMatrix im;
    im.rows = rows;
    im.cols = cols;
    im.positives = train;
    const auto n_neg = static_cast<std::size_t>(
        std::llround(cfg.negative_ratio * static_cast<double>(train.size())));
    im.negatives = sample_unobserved(positives, rows, cols, n_neg, rng);

    std::vector<Cell> blocked(positives.begin(), positives.end());
    blocked.insert(blocked.end(), im.negatives.begin(), im.negatives.end());
    const auto test_neg = sample_unobserved(blocked, rows, cols, test.size(), rng);

    CompletionConfig fold_cfg = cfg;
    fold_cfg.seed = Rng::derive(cfg.seed, stream + "/fit").next_u64();
    const CompletionModel m = pumc_fit(im, D, P, fold_cfg);
    const MatrixXd left = D * m.W, right = P * m.H;

    FoldResult& out = results[job];
    for (const auto& c : test) {
      out.scores.push_back(left.row(c.row).dot(right.row(c.col)));
      out.labels.push_back(1);
    }
    for (const auto& c : test_neg) {
      out.scores.push_back(left.row(c.row).dot(right.row(c.col)));
      out.labels.push_back(0);
    }
    out.auroc = auroc(out.scores, out.labels);
    out.aupr = aupr(out.scores, out.labels);
  });

  MetricReport rep;
  std::vector<double> pooled_scores;
  std::vector<int> pooled_labels;
  for (std::size_t job = 0; job < n_jobs; ++job) {
    const auto& r = results[job];
    rep.per_fold.push_back({static_cast<int>(job) / plan.k, static_cast<int>(job) % plan.k,
                            r.auroc, r.aupr});
    rep.auroc += r.auroc;
    rep.aupr += r.aupr;
    pooled_scores.insert(pooled_scores.end(), r.scores.begin(), r.scores.end());
    pooled_labels.insert(pooled_labels.end(), r.labels.begin(), r.labels.end());
  }
  rep.auroc /= static_cast<double>(n_jobs);
  rep.aupr /= static_cast<double>(n_jobs);
  rep.pooled_auroc = auroc(pooled_scores, pooled_labels);
  rep.pooled_aupr = aupr(pooled_scores, pooled_labels);
  rep.roc = roc_curve(pooled_scores, pooled_labels);
  rep.pr = pr_curve(pooled_scores, pooled_labels);
  return rep;
}

std::vector<double> aggregate_drug_scores(const MatrixXd& block, DrugAggregation how) {
  if (block.cols() == 0) throw ValidationError("cannot aggregate an empty protein subset");
  std::vector<double> out(static_cast<std::size_t>(block.rows()));
  for (Index i = 0; i < block.rows(); ++i) {
    out[static_cast<std::size_t>(i)] =
        how == DrugAggregation::max ? block.row(i).maxCoeff() : block.row(i).mean();
  }
  return out;
}

MetricReport external_validate(std::span<const RankedDrug> ranking,
                               std::span<const std::string> positive_ids) {
  if (positive_ids.empty()) throw ValidationError("external validation set is empty");
  std::unordered_set<std::string> members(positive_ids.begin(), positive_ids.end());
  std::vector<double> scores;
  std::vector<int> labels;
  std::size_t hits = 0;
  for (const auto& d : ranking) {
    scores.push_back(d.score);
    const bool member = members.contains(d.id);
    labels.push_back(member ? 1 : 0);
    hits += member;
  }
  if (hits == 0) throw ValidationError("no external validation drug appears in the ranking");
  MetricReport rep;
  rep.auroc = rep.pooled_auroc = auroc(scores, labels);
  rep.aupr = rep.pooled_aupr = aupr(scores, labels);
  rep.per_fold.push_back({0, 0, rep.auroc, rep.aupr});
  rep.roc = roc_curve(scores, labels);
  rep.pr = pr_curve(scores, labels);
  return rep;
}

std::vector<Association> top_k_associations(const MatrixXd& block,
                                            std::span<const std::string> drug_ids,
                                            std::span<const std::string> protein_ids,
                                            std::size_t k) {
  if (k == 0) throw ValidationError("top-k needs k >= 1");
  if (drug_ids.size() != static_cast<std::size_t>(block.rows()) ||
      protein_ids.size() != static_cast<std::size_t>(block.cols())) {
    throw ValidationError("score block shape does not match the ID lists");
  }
  const std::size_t cells = drug_ids.size() * protein_ids.size();
  if (k > cells) {
    throw ValidationError("top-k of " + std::to_string(k) + " exceeds " + std::to_string(cells) +
                          " scored cells");
  }
  if (!block.allFinite()) throw NumericalError("score block has non-finite values");
  const std::size_t ncols = protein_ids.size();
  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto value = [&](std::size_t flat) {
    return block(static_cast<Index>(flat / ncols), static_cast<Index>(flat % ncols));
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double va = value(a), vb = value(b);
                      if (va != vb) return va > vb;
                      const auto& da = drug_ids[a / ncols];
                      const auto& db = drug_ids[b / ncols];
                      if (da != db) return da < db;
                      return protein_ids[a % ncols] < protein_ids[b % ncols];
                    });
  std::vector<Association> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t f = order[i];
    out.push_back({drug_ids[f / ncols], protein_ids[f % ncols], value(f)});
  }
  return out;
}

}  // namespace hndr

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hndr/complete.hpp"

namespace hndr {

/// Per repeat, each positive is assigned a fold in [0, k).
struct FoldPlan {
  int k = 5;
  int repeats = 1;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::uint32_t>> assignments;
};

/// Uniform random partition of `n_positives` items per repeat; fold sizes differ by at most 1.
FoldPlan make_folds(std::size_t n_positives, int k, int repeats, std::uint64_t seed);

/// Mann-Whitney AUROC with ties credited 0.5. Throws ValidationError unless both classes occur.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Step-wise average precision: sum over distinct thresholds of
/// (recall increment) * precision. Throws ValidationError without positives.
double aupr(std::span<const double> scores, std::span<const int> labels);

struct CurvePoint {
  double threshold;
  double x;
  double y;
};

/// (FPR, TPR) per distinct threshold, from (0,0) at +inf down to (1,1).
std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
/// (recall, precision) per distinct threshold, highest first.
std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const int> labels);

struct FoldMetrics {
  int repeat = 0;
  int fold = 0;
  double auroc = 0.0;
  double aupr = 0.0;
};

struct MetricReport {
  /// Mean over per_fold entries (equals the single value for external validation).
  double auroc = 0.0;
  double aupr = 0.0;
  /// Metrics of all test scores pooled across folds.
  double pooled_auroc = 0.0;
  double pooled_aupr = 0.0;
  std::vector<FoldMetrics> per_fold;
  std::vector<CurvePoint> roc;
  std::vector<CurvePoint> pr;
};

/// k-fold CV over the positives. Each fold's positives are removed from training;
/// they are scored against an equal number of held-out negatives sampled from
/// cells never observed and never used as training negatives.
/// Folds are independent and run on up to `jobs` threads; results do not
/// depend on `jobs`.
MetricReport cross_validate(std::span<const Cell> positives, std::size_t rows, std::size_t cols,
                            const Eigen::MatrixXd& raw_drugs, const Eigen::MatrixXd& raw_proteins,
                            const CompletionConfig& cfg, const FoldPlan& plan, int jobs = 1);

struct RankedDrug {
  std::string id;
  double score;
};

enum class DrugAggregation { max, mean };

/// Per-row aggregate of a drug x protein score block.
std::vector<double> aggregate_drug_scores(const Eigen::MatrixXd& block, DrugAggregation how);

/// AUROC/AUPR with members of `positive_ids` as positives and every other ranked drug as negative.
MetricReport external_validate(std::span<const RankedDrug> ranking,
                               std::span<const std::string> positive_ids);

struct Association {
  std::string drug;
  std::string protein;
  double score;
};

/// Highest-scoring k cells, descending; ties broken by (drug ID, protein ID).
std::vector<Association> top_k_associations(const Eigen::MatrixXd& block,
                                            std::span<const std::string> drug_ids,
                                            std::span<const std::string> protein_ids,
                                            std::size_t k);

}  // namespace hndr

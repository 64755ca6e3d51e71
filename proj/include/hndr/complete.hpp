#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hndr/rng.hpp"

namespace hndr {

struct Cell {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Observed positives and sampled pseudo-negatives of a drug x protein matrix.
struct InteractionMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Cell> positives;
  std::vector<Cell> negatives;
  /// Throws ValidationError on out-of-range cells, duplicates or overlap.
  void validate() const;
};

/// Uniformly samples `count` distinct cells from [rows x cols] minus `excluded`.
/// Result is sorted. Throws ValidationError if not enough cells remain.
std::vector<Cell> sample_unobserved(std::span<const Cell> excluded, std::size_t rows,
                                    std::size_t cols, std::size_t count, Rng& rng);

/// round(ratio * |positives|) cells from the unobserved part of the matrix.
std::vector<Cell> sample_negatives(std::span<const Cell> positives, std::size_t rows,
                                   std::size_t cols, double ratio, std::uint64_t seed);

/// Per-column z-scoring. Constant columns are centered only.
struct ColumnScaling {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;
  static ColumnScaling fit(const Eigen::MatrixXd& features);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;
};

struct CompletionConfig {
  int rank = 32;
  /// Weight of the sampled negatives relative to the positives.
  double alpha = 0.1;
  double lambda = 0.25;
  int max_iters = 100;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  double negative_ratio = 1.0;
  bool standardize = true;
  void validate() const;
};

struct CompletionModel {
  Eigen::MatrixXd W;  // drug feature width x rank
  Eigen::MatrixXd H;  // protein feature width x rank
  /// Objective at initialization, then after every accepted iteration.
  std::vector<double> objective_history;
  std::optional<ColumnScaling> drug_scaling;
  std::optional<ColumnScaling> protein_scaling;

  /// Maps raw features into the space W and H were fitted in.
  Eigen::MatrixXd prepare_drugs(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd prepare_proteins(const Eigen::MatrixXd& raw) const;
};

/// sum_{Omega+} (1 - s_ij)^2 + alpha * sum_{Omega-} s_ij^2 + lambda (||W||^2 + ||H||^2)
/// with s_ij = D_i W H^T P_j^T.
double pumc_objective(const InteractionMatrix& im, const Eigen::MatrixXd& D,
                      const Eigen::MatrixXd& P, const Eigen::MatrixXd& W, const Eigen::MatrixXd& H,
                      double alpha, double lambda);

using IterationCallback = std::function<void(int iteration, const Eigen::MatrixXd& W,
                                             const Eigen::MatrixXd& H, double objective)>;

/// Alternating weighted ridge regression on W and H. Features are used as given.
/// `on_iteration` fires after initialization (iteration 0) and after each accepted iteration.
CompletionModel pumc_fit(const InteractionMatrix& im, const Eigen::MatrixXd& D,
                         const Eigen::MatrixXd& P, const CompletionConfig& cfg,
                         const IterationCallback& on_iteration = {});

/// Standardizes (if configured), samples negatives from `rng`, fits. The returned
/// model carries the scalings so it can be applied to raw features.
CompletionModel train_completion(std::span<const Cell> positives, std::size_t rows,
                                 std::size_t cols, const Eigen::MatrixXd& raw_drugs,
                                 const Eigen::MatrixXd& raw_proteins, const CompletionConfig& cfg,
                                 Rng& rng, std::span<const Cell> also_exclude = {});

/// D_i W H^T P_j^T. D and P must already be in model space.
double score(const Eigen::MatrixXd& D, const CompletionModel& m, const Eigen::MatrixXd& P,
             std::size_t i, std::size_t j);

/// Block of scores; empty optional subsets mean "all".
Eigen::MatrixXd score_matrix(const Eigen::MatrixXd& D, const CompletionModel& m,
                             const Eigen::MatrixXd& P,
                             const std::optional<std::vector<std::size_t>>& rows = std::nullopt,
                             const std::optional<std::vector<std::size_t>>& cols = std::nullopt);

}  // namespace hndr

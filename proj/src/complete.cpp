#include "hndr/complete.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "hndr/error.hpp"

namespace hndr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

namespace {

std::uint64_t key(const Cell& c) { return (std::uint64_t{c.row} << 32) | c.col; }

std::string cell_str(const Cell& c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

}  // namespace

void InteractionMatrix::validate() const {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(positives.size() + negatives.size());
  for (const auto* set : {&positives, &negatives}) {
    for (const auto& c : *set) {
      if (c.row >= rows || c.col >= cols) {
        throw ValidationError("interaction cell " + cell_str(c) + " outside " +
                              std::to_string(rows) + "x" + std::to_string(cols));
      }
      if (!seen.insert(key(c)).second) {
        throw ValidationError("interaction cell " + cell_str(c) + " listed twice or in both sets");
      }
    }
  }
}

std::vector<Cell> sample_unobserved(std::span<const Cell> excluded, std::size_t rows,
                                    std::size_t cols, std::size_t count, Rng& rng) {
  std::unordered_set<std::uint64_t> blocked;
  blocked.reserve(excluded.size());
  for (const auto& c : excluded) {
    if (c.row >= rows || c.col >= cols) {
      throw ValidationError("excluded cell " + cell_str(c) + " outside the matrix");
    }
    blocked.insert(key(c));
  }
  const std::size_t total = rows * cols;
  const std::size_t available = total - blocked.size();
  if (count > available) {
    throw ValidationError("cannot sample " + std::to_string(count) + " negatives: only " +
                          std::to_string(available) + " unobserved cells");
  }
  std::vector<Cell> out;
  out.reserve(count);
  if (2 * count >= available) {
    std::vector<Cell> pool;
    pool.reserve(available);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        Cell cell{static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)};
        if (!blocked.contains(key(cell))) pool.push_back(cell);
      }
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(pool.size() - k));
      std::swap(pool[k], pool[j]);
      out.push_back(pool[k]);
    }
  } else {
    while (out.size() < count) {
      const std::uint64_t flat = rng.below(total);
      Cell cell{static_cast<std::uint32_t>(flat / cols), static_cast<std::uint32_t>(flat % cols)};
      if (blocked.insert(key(cell)).second) out.push_back(cell);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Cell> sample_negatives(std::span<const Cell> positives, std::size_t rows,
                                   std::size_t cols, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw ValidationError("negative ratio must be > 0");
  const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(positives.size())));
  Rng rng = Rng::derive(seed, "negatives");
  return sample_unobserved(positives, rows, cols, count, rng);
}

ColumnScaling ColumnScaling::fit(const MatrixXd& features) {
  ColumnScaling s;
  const auto n = static_cast<double>(features.rows());
  s.mean = features.colwise().mean();
  s.scale = RowVectorXd::Ones(features.cols());
  for (Index j = 0; j < features.cols(); ++j) {
    const double var = (features.col(j).array() - s.mean(j)).square().sum() / n;
    if (var > 1e-24) s.scale(j) = std::sqrt(var);
  }
  return s;
}

MatrixXd ColumnScaling::apply(const MatrixXd& features) const {
  if (features.cols() != mean.size()) {
    throw ValidationError("feature width " + std::to_string(features.cols()) +
                          " does not match scaling width " + std::to_string(mean.size()));
  }
  return ((features.rowwise() - mean).array().rowwise() / scale.array()).matrix();
}

MatrixXd CompletionModel::prepare_drugs(const MatrixXd& raw) const {
  return drug_scaling ? drug_scaling->apply(raw) : raw;
}

MatrixXd CompletionModel::prepare_proteins(const MatrixXd& raw) const {
  return protein_scaling ? protein_scaling->apply(raw) : raw;
}

void CompletionConfig::validate() const {
  if (rank < 1) throw ValidationError("completion rank must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("completion alpha must be in (0,1]");
  if (!(lambda >= 0.0)) throw ValidationError("completion lambda must be >= 0");
  if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (!(tol > 0.0)) throw ValidationError("tol must be > 0");
  if (!(negative_ratio > 0.0)) throw ValidationError("negative_ratio must be > 0");
}

namespace {

struct WeightedCell {
  Index a;  // row in the side being solved
  Index b;  // row in the fixed side
  double weight;
  double target;
};

std::vector<WeightedCell> cells_for(const InteractionMatrix& im, double alpha, bool transpose) {
  std::vector<WeightedCell> out;
  out.reserve(im.positives.size() + im.negatives.size());
  auto push = [&](const Cell& c, double w, double y) {
    const Index r = c.row, k = c.col;
    out.push_back(transpose ? WeightedCell{k, r, w, y} : WeightedCell{r, k, w, y});
  };
  for (const auto& c : im.positives) push(c, 1.0, 1.0);
  for (const auto& c : im.negatives) push(c, alpha, 0.0);
  return out;
}

// Applies the normal-equation operator of
//   sum_cells w (y - F_a V Q_b^T)^2 + lambda ||V||^2
// to V (dropping the factor 2): F^T S Q + lambda V.
MatrixXd apply_normal(const MatrixXd& F, const MatrixXd& Q, const std::vector<WeightedCell>& cells,
                      double lambda, const MatrixXd& V) {
  const MatrixXd FV = F * V;
  MatrixXd M = MatrixXd::Zero(F.rows(), Q.cols());
  for (const auto& c : cells) {
    const double s = c.weight * FV.row(c.a).dot(Q.row(c.b));
    M.row(c.a) += s * Q.row(c.b);
  }
  return F.transpose() * M + lambda * V;
}

// Minimizes the weighted ridge subproblem over V by Jacobi-preconditioned
// conjugate gradients, warm-started at the current V. Every CG iterate lowers
// the quadratic, so the objective cannot increase.
MatrixXd solve_side(const MatrixXd& F, const MatrixXd& Q, const std::vector<WeightedCell>& cells,
                    double lambda, MatrixXd V) {
  const Index d = F.cols(), k = Q.cols();
  MatrixXd rhs = MatrixXd::Zero(F.rows(), k);
  MatrixXd diag_acc = MatrixXd::Zero(F.rows(), k);
  for (const auto& c : cells) {
    if (c.target != 0.0) rhs.row(c.a) += (c.weight * c.target) * Q.row(c.b);
    diag_acc.row(c.a) += c.weight * Q.row(c.b).array().square().matrix();
  }
  const MatrixXd b = F.transpose() * rhs;
  // diag(A)_{pq} = sum_cells w F_{a,p}^2 Q_{b,q}^2 + lambda
  MatrixXd diag = F.array().square().matrix().transpose() * diag_acc;
  diag.array() += lambda;
  const MatrixXd inv_diag =
      (diag.array() > 1e-300).select(diag.array().inverse(), 1.0).matrix();

  MatrixXd r = b - apply_normal(F, Q, cells, lambda, V);
  const double b_norm = std::max(b.norm(), 1e-300);
  constexpr double kTol = 1e-10;
  if (r.norm() <= kTol * b_norm) return V;
  MatrixXd z = r.cwiseProduct(inv_diag);
  MatrixXd p = z;
  double rz = r.cwiseProduct(z).sum();
  const Index max_steps = std::min<Index>(d * k + 10, 400);
  for (Index it = 0; it < max_steps; ++it) {
    const MatrixXd Ap = apply_normal(F, Q, cells, lambda, p);
    const double pAp = p.cwiseProduct(Ap).sum();
    if (!(pAp > 0.0)) break;
    const double step = rz / pAp;
    V += step * p;
    r -= step * Ap;
    if (r.norm() <= kTol * b_norm) break;
    z = r.cwiseProduct(inv_diag);
    const double rz_next = r.cwiseProduct(z).sum();
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return V;
}

double objective_fast(const std::vector<WeightedCell>& cells, const MatrixXd& left,
                      const MatrixXd& right, const MatrixXd& W, const MatrixXd& H, double lambda) {
  double loss = 0.0;
  for (const auto& c : cells) {
    const double e = c.target - left.row(c.a).dot(right.row(c.b));
    loss += c.weight * e * e;
  }
  return loss + lambda * (W.squaredNorm() + H.squaredNorm());
}

}  // namespace

double pumc_objective(const InteractionMatrix& im, const MatrixXd& D, const MatrixXd& P,
                      const MatrixXd& W, const MatrixXd& H, double alpha, double lambda) {
  const MatrixXd left = D * W, right = P * H;
  return objective_fast(cells_for(im, alpha, false), left, right, W, H, lambda);
}

CompletionModel pumc_fit(const InteractionMatrix& im, const MatrixXd& D, const MatrixXd& P,
                         const CompletionConfig& cfg, const IterationCallback& on_iteration) {
  cfg.validate();
  im.validate();
  if (static_cast<std::size_t>(D.rows()) != im.rows) {
    throw ValidationError("drug features have " + std::to_string(D.rows()) + " rows, expected " +
                          std::to_string(im.rows));
  }
  if (static_cast<std::size_t>(P.rows()) != im.cols) {
    throw ValidationError("protein features have " + std::to_string(P.rows()) +
                          " rows, expected " + std::to_string(im.cols));
  }
  if (cfg.rank > std::min(D.cols(), P.cols())) {
    throw ValidationError("completion rank " + std::to_string(cfg.rank) +
                          " exceeds feature width " + std::to_string(std::min(D.cols(), P.cols())));
  }
  if (!D.allFinite() || !P.allFinite()) throw NumericalError("non-finite feature values");

  Rng rng = Rng::derive(cfg.seed, "pumc/init");
  const double init_scale = 1.0 / std::sqrt(static_cast<double>(cfg.rank));
  CompletionModel m;
  m.W.resize(D.cols(), cfg.rank);
  m.H.resize(P.cols(), cfg.rank);
  for (Index j = 0; j < cfg.rank; ++j) {
    for (Index i = 0; i < m.W.rows(); ++i) m.W(i, j) = rng.normal() * init_scale;
    for (Index i = 0; i < m.H.rows(); ++i) m.H(i, j) = rng.normal() * init_scale;
  }

  const auto by_drug = cells_for(im, cfg.alpha, false);
  const auto by_protein = cells_for(im, cfg.alpha, true);
  MatrixXd DW = D * m.W, PH = P * m.H;
  double current = objective_fast(by_drug, DW, PH, m.W, m.H, cfg.lambda);
  if (!std::isfinite(current)) throw NumericalError("completion objective non-finite at start");
  m.objective_history.push_back(current);
  if (on_iteration) on_iteration(0, m.W, m.H, current);

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const double before = current;
    bool moved = false;

    MatrixXd W_new = solve_side(D, PH, by_drug, cfg.lambda, m.W);
    MatrixXd DW_new = D * W_new;
    double obj = objective_fast(by_drug, DW_new, PH, W_new, m.H, cfg.lambda);
    if (!std::isfinite(obj)) {
      throw NumericalError("completion objective non-finite at iteration " + std::to_string(iter) +
                           " (check feature scaling)");
    }
    if (obj <= current) {
      m.W = std::move(W_new);
      DW = std::move(DW_new);
      current = obj;
      moved = true;
    }

    MatrixXd H_new = solve_side(P, DW, by_protein, cfg.lambda, m.H);
    MatrixXd PH_new = P * H_new;
    obj = objective_fast(by_drug, DW, PH_new, m.W, H_new, cfg.lambda);
    if (!std::isfinite(obj)) {
      throw NumericalError("completion objective non-finite at iteration " + std::to_string(iter) +
                           " (check feature scaling)");
    }
    if (obj <= current) {
      m.H = std::move(H_new);
      PH = std::move(PH_new);
      current = obj;
      moved = true;
    }

    if (!moved) break;
    m.objective_history.push_back(current);
    if (on_iteration) on_iteration(iter, m.W, m.H, current);
    const double rel = (before - current) / std::max(std::abs(before), 1e-300);
    if (rel < cfg.tol) break;
  }
  return m;
}

CompletionModel train_completion(std::span<const Cell> positives, std::size_t rows,
                                 std::size_t cols, const MatrixXd& raw_drugs,
                                 const MatrixXd& raw_proteins, const CompletionConfig& cfg,
                                 Rng& rng, std::span<const Cell> also_exclude) {
  cfg.validate();
  std::optional<ColumnScaling> ds, ps;
  if (cfg.standardize) {
    ds = ColumnScaling::fit(raw_drugs);
    ps = ColumnScaling::fit(raw_proteins);
  }
  const MatrixXd D = ds ? ds->apply(raw_drugs) : raw_drugs;
  const MatrixXd P = ps ? ps->apply(raw_proteins) : raw_proteins;

  InteractionMatrix im;
  im.rows = rows;
  im.cols = cols;
  im.positives.assign(positives.begin(), positives.end());
  std::vector<Cell> excluded(positives.begin(), positives.end());
  excluded.insert(excluded.end(), also_exclude.begin(), also_exclude.end());
  const auto count =
      static_cast<std::size_t>(std::llround(cfg.negative_ratio * static_cast<double>(positives.size())));
  im.negatives = sample_unobserved(excluded, rows, cols, count, rng);

  CompletionModel m = pumc_fit(im, D, P, cfg);
  m.drug_scaling = std::move(ds);
  m.protein_scaling = std::move(ps);
  return m;
}

double score(const MatrixXd& D, const CompletionModel& m, const MatrixXd& P, std::size_t i,
             std::size_t j) {
  if (i >= static_cast<std::size_t>(D.rows()) || j >= static_cast<std::size_t>(P.rows())) {
    throw ValidationError("score index (" + std::to_string(i) + "," + std::to_string(j) +
                          ") out of range");
  }
  const auto ii = static_cast<Index>(i), jj = static_cast<Index>(j);
  return (D.row(ii) * m.W).dot(P.row(jj) * m.H);
}

MatrixXd score_matrix(const MatrixXd& D, const CompletionModel& m, const MatrixXd& P,
                      const std::optional<std::vector<std::size_t>>& rows,
                      const std::optional<std::vector<std::size_t>>& cols) {
  auto pick = [](const MatrixXd& F, const std::optional<std::vector<std::size_t>>& subset,
                 const char* what) -> MatrixXd {
    if (!subset) return F;
    if (subset->empty()) throw ValidationError(std::string("empty ") + what + " subset");
    MatrixXd out(static_cast<Index>(subset->size()), F.cols());
    for (std::size_t k = 0; k < subset->size(); ++k) {
      const std::size_t idx = (*subset)[k];
      if (idx >= static_cast<std::size_t>(F.rows())) {
        throw ValidationError(std::string(what) + " index " + std::to_string(idx) + " out of range");
      }
      out.row(static_cast<Index>(k)) = F.row(static_cast<Index>(idx));
    }
    return out;
  };
  const MatrixXd left = pick(D, rows, "drug") * m.W;
  const MatrixXd right = pick(P, cols, "protein") * m.H;
  return left * right.transpose();
}

}  // namespace hndr

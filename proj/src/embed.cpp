#include "hndr/embed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hndr/error.hpp"
#include "hndr/rng.hpp"

namespace hndr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

namespace {

Transition normalize_triplets(std::size_t n, const std::vector<Eigen::Triplet<double>>& trips) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> m(static_cast<Index>(n), static_cast<Index>(n));
  m.setFromTriplets(trips.begin(), trips.end());
  Transition t;
  for (Index r = 0; r < m.outerSize(); ++r) {
    double sum = 0.0;
    for (decltype(m)::InnerIterator it(m, r); it; ++it) sum += it.value();
    if (sum > 0.0) {
      for (decltype(m)::InnerIterator it(m, r); it; ++it) it.valueRef() /= sum;
    } else {
      t.zero_rows.push_back(static_cast<std::size_t>(r));
    }
  }
  m.prune(0.0);
  t.matrix = std::move(m);
  return t;
}

}  // namespace

Transition row_normalize(const Network& net) {
  if (!net.square()) throw ValidationError(net.name + ": random surfing needs a square network");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(net.edges.size());
  for (const auto& e : net.edges) {
    trips.emplace_back(static_cast<Index>(e.row), static_cast<Index>(e.col), e.weight);
  }
  return normalize_triplets(net.rows, trips);
}

Transition row_normalize(const MatrixXd& adjacency) {
  if (adjacency.rows() != adjacency.cols()) {
    throw ValidationError("row_normalize: adjacency is " + std::to_string(adjacency.rows()) + "x" +
                          std::to_string(adjacency.cols()) + ", expected square");
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (Index i = 0; i < adjacency.rows(); ++i) {
    for (Index j = 0; j < adjacency.cols(); ++j) {
      const double w = adjacency(i, j);
      if (w < 0.0 || !std::isfinite(w)) throw ValidationError("row_normalize: negative weight");
      if (w != 0.0) trips.emplace_back(i, j, w);
    }
  }
  return normalize_triplets(static_cast<std::size_t>(adjacency.rows()), trips);
}

void SurfConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("surf alpha must lie in [0,1]");
  if (steps < 1) throw ValidationError("surf steps must be >= 1");
}

MatrixXd random_surf(const Transition& transition, const SurfConfig& cfg) {
  cfg.validate();
  const auto& t = transition.matrix;
  if (t.rows() != t.cols()) throw ValidationError("random_surf: transition matrix not square");
  const Index n = t.rows();
  const MatrixXd restart = MatrixXd::Identity(n, n);
  MatrixXd p = restart;
  MatrixXd pco = MatrixXd::Zero(n, n);
  for (int k = 0; k < cfg.steps; ++k) {
    MatrixXd walked = p * t;
    p = cfg.alpha * walked + (1.0 - cfg.alpha) * restart;
    pco += p;
  }
  return pco;
}

PpmiMatrix ppmi(const MatrixXd& pco, double shift) {
  if (!(shift >= 0.0) || !std::isfinite(shift)) throw ValidationError("ppmi shift must be >= 0");
  if (!pco.allFinite() || (pco.array() < 0.0).any()) {
    throw ValidationError("ppmi: co-occurrence matrix must be finite and nonnegative");
  }
  const Eigen::VectorXd row = pco.rowwise().sum();
  const RowVectorXd col = pco.colwise().sum();
  const double total = row.sum();
  if (!(total > 0.0)) throw ValidationError("ppmi: co-occurrence matrix is all zero");

  PpmiMatrix out;
  out.shift = shift;
  out.values = MatrixXd::Zero(pco.rows(), pco.cols());
  for (Index j = 0; j < pco.cols(); ++j) {
    for (Index i = 0; i < pco.rows(); ++i) {
      const double v = pco(i, j);
      if (v == 0.0) continue;
      const double pmi = std::log((v * total) / (row(i) * col(j)));
      out.values(i, j) = std::max(0.0, pmi - shift);
    }
  }
  return out;
}

// --- SDAE ------------------------------------------------------------------

void SdaeConfig::validate(bool check_layers) const {
  if (check_layers) {
    if (layer_sizes.size() < 2) {
      throw ValidationError("SDAE needs at least an input and an embedding width");
    }
    for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
      if (layer_sizes[i] < 1) throw ValidationError("SDAE layer widths must be positive");
      if (i > 0 && layer_sizes[i] >= layer_sizes[i - 1]) {
        throw ValidationError("SDAE layer widths must be strictly decreasing (got " +
                              std::to_string(layer_sizes[i - 1]) + " then " +
                              std::to_string(layer_sizes[i]) + ")");
      }
    }
  }
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw ValidationError("noise_rate must be in [0,1)");
  if (!(lambda >= 0.0)) throw ValidationError("SDAE lambda must be >= 0");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
}

SdaeModel SdaeModel::initialize(const std::vector<int>& sizes, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "sdae/init");
  std::vector<int> widths(sizes.begin(), sizes.end());
  widths.insert(widths.end(), sizes.rbegin() + 1, sizes.rend());
  SdaeModel model;
  model.encoder_depth = sizes.size() - 1;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    const int in = widths[l], out = widths[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    layer.weights.resize(in, out);
    for (Index c = 0; c < out; ++c)
      for (Index r = 0; r < in; ++r) layer.weights(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
    layer.bias = RowVectorXd::Zero(out);
    layer.activation = (l + 2 == widths.size()) ? Activation::linear : Activation::sigmoid;
    model.layers.push_back(std::move(layer));
  }
  return model;
}

namespace {

void activate(MatrixXd& z, Activation a) {
  if (a == Activation::sigmoid) z = (1.0 + (-z.array()).exp()).inverse().matrix();
}

// Returns the activations of every layer, with the input at index 0.
std::vector<MatrixXd> forward(const SdaeModel& model, const MatrixXd& input, std::size_t depth) {
  std::vector<MatrixXd> acts;
  acts.reserve(depth + 1);
  acts.push_back(input);
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = model.layers[l];
    MatrixXd z = acts.back() * layer.weights;
    z.rowwise() += layer.bias;
    activate(z, layer.activation);
    acts.push_back(std::move(z));
  }
  return acts;
}

double weight_penalty(const SdaeModel& model) {
  double s = 0.0;
  for (const auto& l : model.layers) s += l.weights.squaredNorm();
  return s;
}

void check_widths(const SdaeModel& model, const MatrixXd& x) {
  if (model.layers.empty()) throw ValidationError("SDAE model has no layers");
  if (x.cols() != model.input_width()) {
    throw ValidationError("SDAE input width " + std::to_string(x.cols()) +
                          " does not match model width " + std::to_string(model.input_width()));
  }
}

void corrupt(MatrixXd& batch, double rate, Rng& rng, std::vector<Index>& scratch) {
  const Index d = batch.cols();
  const auto drop = static_cast<Index>(std::llround(rate * static_cast<double>(d)));
  if (drop == 0) return;
  scratch.resize(static_cast<std::size_t>(d));
  for (Index r = 0; r < batch.rows(); ++r) {
    std::iota(scratch.begin(), scratch.end(), Index{0});
    // Partial Fisher-Yates: the first `drop` slots are a uniform subset.
    for (Index k = 0; k < drop; ++k) {
      const auto j = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(d - k)));
      std::swap(scratch[static_cast<std::size_t>(k)], scratch[static_cast<std::size_t>(j)]);
      batch(r, scratch[static_cast<std::size_t>(k)]) = 0.0;
    }
  }
}

}  // namespace

MatrixXd sdae_reconstruct(const SdaeModel& model, const MatrixXd& input) {
  check_widths(model, input);
  return forward(model, input, model.layers.size()).back();
}

double sdae_objective(const SdaeModel& model, const MatrixXd& input, const MatrixXd& target,
                      double lambda) {
  const MatrixXd recon = sdae_reconstruct(model, input);
  return (recon - target).squaredNorm() / static_cast<double>(input.rows()) +
         lambda * weight_penalty(model);
}

SdaeGradient sdae_gradient(const SdaeModel& model, const MatrixXd& input, const MatrixXd& target,
                           double lambda) {
  check_widths(model, input);
  const std::size_t depth = model.layers.size();
  const auto acts = forward(model, input, depth);
  SdaeGradient g;
  g.weights.resize(depth);
  g.bias.resize(depth);
  MatrixXd delta = (2.0 / static_cast<double>(input.rows())) * (acts.back() - target);
  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = model.layers[l];
    if (layer.activation == Activation::sigmoid) {
      delta.array() *= acts[l + 1].array() * (1.0 - acts[l + 1].array());
    }
    g.weights[l] = acts[l].transpose() * delta + 2.0 * lambda * layer.weights;
    g.bias[l] = delta.colwise().sum();
    if (l > 0) delta = delta * layer.weights.transpose();
  }
  return g;
}

SdaeModel sdae_train(const MatrixXd& x, const SdaeConfig& cfg) {
  cfg.validate(true);
  if (cfg.layer_sizes.front() != x.cols()) {
    throw ValidationError("SDAE input width " + std::to_string(x.cols()) +
                          " does not match configured width " +
                          std::to_string(cfg.layer_sizes.front()));
  }
  return sdae_train(x, cfg, SdaeModel::initialize(cfg.layer_sizes, cfg.seed));
}

SdaeModel sdae_train(const MatrixXd& x, const SdaeConfig& cfg, SdaeModel model) {
  cfg.validate(false);
  check_widths(model, x);
  if (x.rows() == 0) throw ValidationError("SDAE training set is empty");
  Rng rng = Rng::derive(cfg.seed, "sdae/train");
  model.loss_history.clear();
  const double initial = sdae_objective(model, x, x, cfg.lambda);
  if (!std::isfinite(initial)) throw NumericalError("SDAE objective non-finite before training");
  model.loss_history.push_back(initial);

  const Index n = x.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<Index> scratch;
  MatrixXd batch, target;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<Index>(order));
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index len = std::min<Index>(cfg.batch_size, n - start);
      target.resize(len, x.cols());
      for (Index r = 0; r < len; ++r) target.row(r) = x.row(order[static_cast<std::size_t>(start + r)]);
      batch = target;
      corrupt(batch, cfg.noise_rate, rng, scratch);
      const SdaeGradient g = sdae_gradient(model, batch, target, cfg.lambda);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        model.layers[l].weights -= cfg.learning_rate * g.weights[l];
        model.layers[l].bias -= cfg.learning_rate * g.bias[l];
      }
    }
    const double loss = sdae_objective(model, x, x, cfg.lambda);
    if (!std::isfinite(loss)) {
      throw NumericalError("SDAE objective became non-finite at epoch " + std::to_string(epoch) +
                           " (learning rate too large?)");
    }
    model.loss_history.push_back(loss);
  }
  return model;
}

MatrixXd sdae_encode(const SdaeModel& model, const MatrixXd& x) {
  check_widths(model, x);
  return forward(model, x, model.encoder_depth).back();
}

FeatureMatrix fuse_embeddings(const std::vector<Embedding>& parts) {
  if (parts.empty()) throw ValidationError("fuse_embeddings: no parts");
  const auto& first = parts.front();
  Index width = 0;
  for (const auto& p : parts) {
    if (p.kind != first.kind) {
      throw ValidationError("fuse_embeddings: " + p.network + " is a " +
                            std::string(to_string(p.kind)) + " embedding, expected " +
                            std::string(to_string(first.kind)));
    }
    if (p.values.rows() != first.values.rows()) {
      throw ValidationError("fuse_embeddings: " + p.network + " has " +
                            std::to_string(p.values.rows()) + " rows, expected " +
                            std::to_string(first.values.rows()));
    }
    if (p.id_fingerprint != first.id_fingerprint) {
      throw ValidationError("fuse_embeddings: " + p.network + " uses a different ID map than " +
                            first.network);
    }
    if (!p.values.allFinite()) throw NumericalError("fuse_embeddings: " + p.network + " non-finite");
    width += p.values.cols();
  }
  FeatureMatrix fm;
  fm.kind = first.kind;
  fm.values.resize(first.values.rows(), width);
  Index at = 0;
  for (const auto& p : parts) {
    fm.values.middleCols(at, p.values.cols()) = p.values;
    at += p.values.cols();
    fm.provenance.emplace_back(p.network, static_cast<int>(p.values.cols()));
  }
  return fm;
}

Embedding embed_network(const Network& net, const EntityIdMap& ids, const EmbedConfig& cfg) {
  if (!net.square()) throw ValidationError(net.name + ": only square networks can be embedded");
  if (ids.size() != net.rows || ids.kind() != net.row_kind) {
    throw ValidationError(net.name + ": ID map does not match network rows");
  }
  const Transition t = row_normalize(net);
  const MatrixXd pco = random_surf(t, cfg.surf);
  const PpmiMatrix pp = ppmi(pco, cfg.ppmi_shift);

  SdaeConfig sdae = cfg.sdae;
  sdae.layer_sizes.insert(sdae.layer_sizes.begin(), static_cast<int>(net.rows));
  const SdaeModel model = sdae_train(pp.values, sdae);

  Embedding e;
  e.network = net.name;
  e.kind = net.row_kind;
  e.id_fingerprint = ids.fingerprint();
  e.values = sdae_encode(model, pp.values);
  return e;
}

}  // namespace hndr

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hndr/netio.hpp"

namespace hndr {

/// Row-stochastic transition matrix. Rows with no outgoing weight stay zero.
struct Transition {
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
  std::vector<std::size_t> zero_rows;
};

/// Throws ValidationError for non-square input.
Transition row_normalize(const Network& net);
Transition row_normalize(const Eigen::MatrixXd& adjacency);

struct SurfConfig {
  /// Probability of continuing the walk; 1 - alpha restarts at the source.
  double alpha = 0.98;
  int steps = 10;
  void validate() const;
};

/// Accumulated visit probabilities: with P_0 = I and
/// P_k = alpha * P_{k-1} T + (1 - alpha) * P_0, returns sum_{k=1..K} P_k.
Eigen::MatrixXd random_surf(const Transition& transition, const SurfConfig& cfg);

struct PpmiMatrix {
  Eigen::MatrixXd values;
  double shift = 0.0;
};

/// max(0, PMI - shift) with zero cells of the input mapped straight to 0.
PpmiMatrix ppmi(const Eigen::MatrixXd& pco, double shift = 0.0);

enum class Activation { sigmoid, linear };

struct DenseLayer {
  Eigen::MatrixXd weights;  // in x out
  Eigen::RowVectorXd bias;  // 1 x out
  Activation activation = Activation::sigmoid;
};

struct SdaeConfig {
  /// Encoder widths from input to embedding; the decoder mirrors them.
  std::vector<int> layer_sizes;
  double noise_rate = 0.2;
  double lambda = 1e-4;
  double learning_rate = 0.05;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;
  /// Checks everything; when `check_layers` is false the widths are left alone
  /// (used when training starts from a supplied model).
  void validate(bool check_layers = true) const;
};

/// Mirrored encoder/decoder stack. The first `encoder_depth` layers form the encoder.
struct SdaeModel {
  std::vector<DenseLayer> layers;
  std::size_t encoder_depth = 0;
  std::vector<double> loss_history;

  int input_width() const { return static_cast<int>(layers.front().weights.rows()); }
  int embedding_width() const {
    return static_cast<int>(layers[encoder_depth - 1].weights.cols());
  }
  /// Sigmoid hidden layers, linear reconstruction layer, Glorot-uniform weights.
  static SdaeModel initialize(const std::vector<int>& layer_sizes, std::uint64_t seed);
};

/// Full forward pass (encoder then decoder).
Eigen::MatrixXd sdae_reconstruct(const SdaeModel& model, const Eigen::MatrixXd& input);

/// Training objective: ||target - reconstruct(input)||_F^2 / rows + lambda * sum_l ||W_l||_F^2.
double sdae_objective(const SdaeModel& model, const Eigen::MatrixXd& input,
                      const Eigen::MatrixXd& target, double lambda);

struct SdaeGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::RowVectorXd> bias;
};

/// Analytic gradient of sdae_objective with respect to every weight and bias.
SdaeGradient sdae_gradient(const SdaeModel& model, const Eigen::MatrixXd& input,
                           const Eigen::MatrixXd& target, double lambda);

/// Trains a freshly initialized model on the rows of `x`. loss_history[0] is
/// the clean objective before training, then one entry per epoch.
/// Throws NumericalError naming the epoch if the objective becomes non-finite.
SdaeModel sdae_train(const Eigen::MatrixXd& x, const SdaeConfig& cfg);

/// Continues training an existing model.
SdaeModel sdae_train(const Eigen::MatrixXd& x, const SdaeConfig& cfg, SdaeModel model);

/// Encoder half without corruption. Throws ValidationError on width mismatch.
Eigen::MatrixXd sdae_encode(const SdaeModel& model, const Eigen::MatrixXd& x);

struct Embedding {
  std::string network;
  EntityKind kind = EntityKind::drug;
  /// EntityIdMap::fingerprint() of the row ordering.
  std::string id_fingerprint;
  Eigen::MatrixXd values;
};

struct FeatureMatrix {
  EntityKind kind = EntityKind::drug;
  Eigen::MatrixXd values;
  std::vector<std::pair<std::string, int>> provenance;
};

/// Column-wise concatenation in the given order.
FeatureMatrix fuse_embeddings(const std::vector<Embedding>& parts);

struct EmbedConfig {
  SurfConfig surf;
  double ppmi_shift = 0.0;
  SdaeConfig sdae;  // layer_sizes excludes the input width here
};

/// row_normalize -> random_surf -> ppmi -> sdae_train -> sdae_encode for one network.
Embedding embed_network(const Network& net, const EntityIdMap& ids, const EmbedConfig& cfg);

}  // namespace hndr

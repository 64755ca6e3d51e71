#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hndr/complete.hpp"
#include "hndr/embed.hpp"
#include "hndr/eval.hpp"
#include "hndr/netio.hpp"

namespace hndr {

/// Bumped whenever a stage's output for the same inputs could change.
inline constexpr const char* kCodeVersion = "hndr-0.1.0";

struct NetworkSpec {
  std::string name;
  EntityKind rows = EntityKind::drug;
  EntityKind cols = EntityKind::drug;
  std::filesystem::path path;
  bool symmetric = false;
  bool embed = false;
};

struct JaccardSpec {
  std::string name;
  std::string source;  // a NetworkSpec name
  Axis axis = Axis::rows;
  double cutoff = 0.0;
};

struct SimilarityFileSpec {
  std::string name;
  EntityKind kind = EntityKind::drug;
  std::filesystem::path path;
};

struct PipelineConfig {
  std::filesystem::path config_path;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::map<EntityKind, std::filesystem::path> id_maps;
  std::vector<NetworkSpec> networks;
  std::vector<JaccardSpec> jaccard;
  std::vector<SimilarityFileSpec> similarity_files;
  std::string interactions;
  EmbedConfig embed_defaults;
  std::map<std::string, EmbedConfig> embed_overrides;
  CompletionConfig completion;
  int folds = 5;
  int repeats = 10;
  std::optional<std::filesystem::path> external_set;
  DrugAggregation aggregation = DrugAggregation::max;
  std::optional<std::filesystem::path> protein_subset;
  std::size_t top_k = 100;

  const EmbedConfig& embed_config_for(const std::string& network) const;
  /// Checks referenced files exist and per-stage settings are valid.
  void validate() const;
};

/// Parses the JSON config. Relative paths resolve against the config's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

enum class Stage { similarity, embed, fit, evaluate, rank };
std::string_view to_string(Stage stage);

struct RunOptions {
  int jobs = 1;
  bool force = false;
  std::ostream* log = nullptr;
};

struct StageResult {
  Stage stage;
  std::string hash;
  bool skipped = false;
};

/// Runs one stage, skipping it when its manifest matches the current inputs.
/// Upstream stages must have completed. Throws ValidationError/NumericalError;
/// the message is prefixed with "stage=<name>" context.
StageResult run_stage(const PipelineConfig& cfg, Stage stage, const RunOptions& opts = {});

/// Fused features from the embed stage's artifacts (which must be current).
FeatureMatrix load_stage_features(const PipelineConfig& cfg, EntityKind kind);

/// Positive drug x protein cells of the configured interaction network.
std::vector<Cell> load_interactions(const PipelineConfig& cfg);

/// similarity -> embed -> fit -> evaluate -> rank.
std::vector<StageResult> run_pipeline(const PipelineConfig& cfg, const RunOptions& opts = {});

}  // namespace hndr

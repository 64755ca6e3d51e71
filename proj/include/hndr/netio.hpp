#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hndr {

enum class EntityKind { drug, protein, disease };

std::string_view to_string(EntityKind kind);
/// Throws ValidationError for anything other than drug/protein/disease.
EntityKind parse_entity_kind(std::string_view name);

/// Dense 0..n-1 indexing of external string IDs, in file order.
class EntityIdMap {
 public:
  EntityIdMap() = default;
  /// Throws ValidationError on duplicate or empty IDs.
  EntityIdMap(EntityKind kind, std::vector<std::string> names);

  EntityKind kind() const { return kind_; }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::optional<std::size_t> find(std::string_view id) const;
  /// Throws ValidationError naming the ID when absent.
  std::size_t index_of(std::string_view id) const;

  /// Identity of the ordered ID list; equal fingerprints mean identical row order.
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  EntityKind kind_ = EntityKind::drug;
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string fingerprint_;
};

EntityIdMap load_id_map(const std::filesystem::path& path, EntityKind kind);

struct Edge {
  std::size_t row = 0;
  std::size_t col = 0;
  double weight = 1.0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Sparse labeled adjacency. Square networks may be flagged symmetric, in which
/// case both (i,j) and (j,i) are stored.
struct Network {
  std::string name;
  EntityKind row_kind = EntityKind::drug;
  EntityKind col_kind = EntityKind::drug;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool symmetric = false;
  /// Sorted by (row, col) when produced by this module.
  std::vector<Edge> edges;

  bool square() const { return rows == cols && row_kind == col_kind; }
  /// Stored entries; symmetric networks count each off-diagonal edge twice.
  std::size_t entry_count() const { return edges.size(); }
  /// Logical edges: for symmetric networks, unordered pairs (i <= j).
  std::size_t edge_count() const;
  Eigen::MatrixXd to_dense() const;

  friend bool operator==(const Network&, const Network&) = default;
};

/// A square symmetric network with values in [0, 1] plus where it came from.
struct SimilarityNetwork {
  Network network;
  std::string source;
  double cutoff = 0.0;
  /// Entities with no associations; they carry no similarity, not even to themselves.
  std::vector<std::size_t> isolated;
};

/// Parses "rowID<TAB>colID[<TAB>weight]" lines. '#' lines and blank lines are skipped.
/// Identical duplicates collapse; conflicting duplicates are rejected.
Network load_edge_list(const std::filesystem::path& path, const EntityIdMap& rows,
                       const EntityIdMap& cols, bool symmetric, std::string name = {});

/// Writes every stored entry, one per line, round-trip exact.
void write_edge_list(const Network& net, const EntityIdMap& rows, const EntityIdMap& cols,
                     const std::filesystem::path& path, std::string_view header_comment = {});

/// Builds a network from triples, sorting and (if symmetric) closing it.
Network make_network(std::string name, EntityKind row_kind, EntityKind col_kind, std::size_t rows,
                     std::size_t cols, std::vector<Edge> edges, bool symmetric);

enum class Axis { rows, cols };

/// Pairwise Jaccard coefficient over binarized neighbor sets of one side of an
/// association network. Values below `cutoff` are dropped; zeros are never stored.
SimilarityNetwork jaccard_similarity(const Network& assoc, Axis axis, double cutoff = 0.0);

/// Loads a precomputed similarity file; checks squareness, symmetry and [0,1] range.
SimilarityNetwork load_similarity(const std::filesystem::path& path, const EntityIdMap& ids,
                                  std::string name = {});

/// One human-readable line per invariant violation; empty means valid.
std::vector<std::string> validate_network(const Network& net);

}  // namespace hndr

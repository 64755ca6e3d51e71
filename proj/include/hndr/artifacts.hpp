#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hndr/complete.hpp"
#include "hndr/embed.hpp"
#include "hndr/eval.hpp"
#include "hndr/netio.hpp"

namespace hndr {

/// Space-separated key=value pairs from a "# k=v k=v" header line.
std::map<std::string, std::string> parse_header(const std::string& line);

/// TSV: "# kind=.. network=.. rows=.. dims=.. config_hash=.." then "ID<TAB>v1<TAB>v2...".
void write_embedding(const Embedding& e, const EntityIdMap& ids, const std::string& config_hash,
                     const std::filesystem::path& path);

struct LoadedEmbedding {
  Embedding embedding;
  std::string config_hash;
};

/// Row IDs must match `ids` in order.
LoadedEmbedding read_embedding(const std::filesystem::path& path, const EntityIdMap& ids);

struct ModelFile {
  CompletionModel model;
  std::string config_hash;
  std::vector<std::pair<std::string, int>> drug_provenance;
  std::vector<std::pair<std::string, int>> protein_provenance;
};

void write_model(const ModelFile& mf, const std::filesystem::path& path);
ModelFile read_model(const std::filesystem::path& path);

/// CSV with header "threshold,x,y".
void write_curve(const std::vector<CurvePoint>& pts, const std::filesystem::path& path);

/// "# config_hash=..." header, then drugID, proteinID, score.
void write_associations(const std::vector<Association>& rows, const std::string& config_hash,
                        const std::filesystem::path& path);

/// One ID per line (the external validation list, protein subsets).
std::vector<std::string> read_id_list(const std::filesystem::path& path);

}  // namespace hndr

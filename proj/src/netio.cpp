#include "hndr/netio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "hndr/error.hpp"
#include "hndr/hash.hpp"
#include "hndr/textio.hpp"

namespace hndr {

std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::drug:
      return "drug";
    case EntityKind::protein:
      return "protein";
    case EntityKind::disease:
      return "disease";
  }
  return "unknown";
}

EntityKind parse_entity_kind(std::string_view name) {
  if (name == "drug") return EntityKind::drug;
  if (name == "protein") return EntityKind::protein;
  if (name == "disease") return EntityKind::disease;
  throw ValidationError("unknown entity kind '" + std::string(name) + "'");
}

EntityIdMap::EntityIdMap(EntityKind kind, std::vector<std::string> names)
    : kind_(kind), names_(std::move(names)) {
  index_.reserve(names_.size());
  Fnv64 h;
  h.update(to_string(kind_));
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ValidationError("empty ID at position " + std::to_string(i + 1));
    auto [it, inserted] = index_.emplace(names_[i], i);
    if (!inserted) {
      throw ValidationError("duplicate ID '" + names_[i] + "' at line " + std::to_string(i + 1) +
                            " (first seen at line " + std::to_string(it->second + 1) + ")");
    }
    h.update(names_[i]).update(std::string_view("\n"));
  }
  fingerprint_ = h.hex();
}

std::optional<std::size_t> EntityIdMap::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EntityIdMap::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw ValidationError("unknown " + std::string(to_string(kind_)) + " ID '" + std::string(id) +
                        "'");
}

EntityIdMap load_id_map(const std::filesystem::path& path, EntityKind kind) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open ID map: " + path.string());
  std::vector<std::string> names;
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view id = trim(line);
    if (id.empty()) continue;
    auto [it, inserted] = seen.emplace(std::string(id), lineno);
    if (!inserted) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": duplicate ID '" +
                            std::string(id) + "' (first at line " + std::to_string(it->second) +
                            ")");
    }
    names.emplace_back(id);
  }
  if (names.empty()) throw ValidationError("empty ID map: " + path.string());
  return EntityIdMap(kind, std::move(names));
}

std::size_t Network::edge_count() const {
  if (!symmetric) return edges.size();
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [](const Edge& e) { return e.row <= e.col; }));
}

Eigen::MatrixXd Network::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                            static_cast<Eigen::Index>(cols));
  for (const auto& e : edges) {
    m(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.weight;
  }
  return m;
}

namespace {

bool edge_less(const Edge& a, const Edge& b) {
  return a.row != b.row ? a.row < b.row : a.col < b.col;
}

// Sorts and removes identical duplicates; conflicting weights are an error.
void canonicalize(std::vector<Edge>& edges, const std::string& what) {
  std::stable_sort(edges.begin(), edges.end(), edge_less);
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (const auto& e : edges) {
    if (!out.empty() && out.back().row == e.row && out.back().col == e.col) {
      if (out.back().weight != e.weight) {
        throw ValidationError(what + ": conflicting weights for entry (" + std::to_string(e.row) +
                              "," + std::to_string(e.col) + ")");
      }
      continue;
    }
    out.push_back(e);
  }
  edges = std::move(out);
}

}  // namespace

Network make_network(std::string name, EntityKind row_kind, EntityKind col_kind, std::size_t rows,
                     std::size_t cols, std::vector<Edge> edges, bool symmetric) {
  Network net;
  net.name = std::move(name);
  net.row_kind = row_kind;
  net.col_kind = col_kind;
  net.rows = rows;
  net.cols = cols;
  net.symmetric = symmetric;
  if (symmetric && !(rows == cols && row_kind == col_kind)) {
    throw ValidationError(net.name + ": symmetric flag requires a square homogeneous network");
  }
  for (const auto& e : edges) {
    if (e.row >= rows || e.col >= cols) {
      throw ValidationError(net.name + ": entry (" + std::to_string(e.row) + "," +
                            std::to_string(e.col) + ") outside shape");
    }
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw ValidationError(net.name + ": negative or non-finite weight");
    }
  }
  if (symmetric) {
    const std::size_t n = edges.size();
    for (std::size_t k = 0; k < n; ++k) {
      if (edges[k].row != edges[k].col) edges.push_back({edges[k].col, edges[k].row, edges[k].weight});
    }
  }
  canonicalize(edges, net.name);
  net.edges = std::move(edges);
  return net;
}

Network load_edge_list(const std::filesystem::path& path, const EntityIdMap& rows,
                       const EntityIdMap& cols, bool symmetric, std::string name) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open edge list: " + path.string());
  if (name.empty()) name = path.stem().string();
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  const auto where = [&] { return path.string() + ":" + std::to_string(lineno) + ": "; };
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = line;
    if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
    if (trim(sv).empty() || sv.front() == '#') continue;
    auto fields = split(sv, '\t');
    if (fields.size() < 2 || fields.size() > 3) {
      throw ValidationError(where() + "expected 2 or 3 tab-separated fields");
    }
    auto r = rows.find(trim(fields[0]));
    if (!r) throw ValidationError(where() + "unknown ID '" + std::string(trim(fields[0])) + "'");
    auto c = cols.find(trim(fields[1]));
    if (!c) throw ValidationError(where() + "unknown ID '" + std::string(trim(fields[1])) + "'");
    double w = 1.0;
    if (fields.size() == 3) {
      if (!parse_double(fields[2], w) || !std::isfinite(w)) {
        throw ValidationError(where() + "bad weight '" + std::string(fields[2]) + "'");
      }
      if (w < 0.0) throw ValidationError(where() + "negative weight " + std::string(fields[2]));
    }
    edges.push_back({*r, *c, w});
  }
  if (symmetric && rows.kind() != cols.kind()) {
    throw ValidationError(path.string() + ": symmetric flag on a bipartite network");
  }
  return make_network(std::move(name), rows.kind(), cols.kind(), rows.size(), cols.size(),
                      std::move(edges), symmetric);
}

void write_edge_list(const Network& net, const EntityIdMap& rows, const EntityIdMap& cols,
                     const std::filesystem::path& path, std::string_view header_comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write: " + path.string());
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  for (const auto& e : net.edges) {
    out << rows.name(e.row) << '\t' << cols.name(e.col) << '\t' << format_double(e.weight) << '\n';
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

SimilarityNetwork jaccard_similarity(const Network& assoc, Axis axis, double cutoff) {
  if (!(cutoff >= 0.0 && cutoff <= 1.0)) throw ValidationError("Jaccard cutoff must be in [0,1]");
  const bool by_rows = axis == Axis::rows;
  const std::size_t n = by_rows ? assoc.rows : assoc.cols;
  const std::size_t m = by_rows ? assoc.cols : assoc.rows;

  // Binarized neighbor sets and their inverse.
  std::vector<std::vector<std::size_t>> nbrs(n), inverse(m);
  for (const auto& e : assoc.edges) {
    if (!(e.weight > 0.0)) continue;
    const std::size_t a = by_rows ? e.row : e.col;
    const std::size_t b = by_rows ? e.col : e.row;
    nbrs[a].push_back(b);
  }
  for (std::size_t a = 0; a < n; ++a) {
    auto& v = nbrs[a];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (std::size_t b : v) inverse[b].push_back(a);
  }

  SimilarityNetwork sim;
  sim.cutoff = cutoff;
  sim.source = assoc.name + (by_rows ? " (rows)" : " (cols)");
  Network& net = sim.network;
  net.name = assoc.name + "_jaccard";
  net.row_kind = net.col_kind = by_rows ? assoc.row_kind : assoc.col_kind;
  net.rows = net.cols = n;
  net.symmetric = true;

  std::vector<std::size_t> common(n, 0);
  std::vector<std::size_t> touched;
  std::vector<std::vector<Edge>> per_row(n);
  for (std::size_t a = 0; a < n; ++a) {
    if (nbrs[a].empty()) {
      sim.isolated.push_back(a);
      continue;
    }
    per_row[a].push_back({a, a, 1.0});
    touched.clear();
    for (std::size_t x : nbrs[a]) {
      for (std::size_t b : inverse[x]) {
        if (b <= a) continue;
        if (common[b]++ == 0) touched.push_back(b);
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t b : touched) {
      const double inter = static_cast<double>(common[b]);
      const double uni = static_cast<double>(nbrs[a].size() + nbrs[b].size() - common[b]);
      const double s = inter / uni;
      common[b] = 0;
      if (s >= cutoff && s > 0.0) {
        per_row[a].push_back({a, b, s});
        per_row[b].push_back({b, a, s});
      }
    }
  }
  for (auto& row : per_row) {
    std::sort(row.begin(), row.end(), edge_less);
    net.edges.insert(net.edges.end(), row.begin(), row.end());
  }
  return sim;
}

SimilarityNetwork load_similarity(const std::filesystem::path& path, const EntityIdMap& ids,
                                  std::string name) {
  SimilarityNetwork sim;
  sim.network = load_edge_list(path, ids, ids, true, std::move(name));
  sim.source = path.filename().string();
  for (const auto& e : sim.network.edges) {
    if (e.weight > 1.0) {
      throw ValidationError(path.string() + ": similarity value " + format_double(e.weight) +
                            " outside [0,1]");
    }
  }
  return sim;
}

std::vector<std::string> validate_network(const Network& net) {
  std::vector<std::string> report;
  const auto at = [](const Edge& e) {
    return "(" + std::to_string(e.row) + "," + std::to_string(e.col) + ")";
  };
  std::map<std::pair<std::size_t, std::size_t>, double> cells;
  for (const auto& e : net.edges) {
    if (e.row >= net.rows || e.col >= net.cols) {
      report.push_back("entry " + at(e) + " outside shape " + std::to_string(net.rows) + "x" +
                       std::to_string(net.cols));
      continue;
    }
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      report.push_back("entry " + at(e) + " has negative or non-finite weight");
    }
    auto [it, inserted] = cells.emplace(std::make_pair(e.row, e.col), e.weight);
    if (!inserted) report.push_back("duplicate entry " + at(e));
  }
  if (net.symmetric) {
    if (!net.square()) report.push_back("symmetric flag on a non-square network");
    for (const auto& [key, w] : cells) {
      const auto [i, j] = key;
      if (i >= j) {
        if (i == j) continue;
        // Report each unordered pair once: from the lower triangle only when
        // the upper mirror is absent.
        if (!cells.contains({j, i})) {
          report.push_back("(" + std::to_string(i) + "," + std::to_string(j) +
                           ") present without (" + std::to_string(j) + "," + std::to_string(i) +
                           ")");
        }
        continue;
      }
      auto mirror = cells.find({j, i});
      if (mirror == cells.end()) {
        report.push_back("(" + std::to_string(i) + "," + std::to_string(j) +
                         ") present without (" + std::to_string(j) + "," + std::to_string(i) +
                         ")");
      } else if (mirror->second != w) {
        report.push_back("(" + std::to_string(i) + "," + std::to_string(j) +
                         ") weight differs from its mirror");
      }
    }
  }
  return report;
}

}  // namespace hndr

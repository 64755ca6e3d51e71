#include "hndr/artifacts.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "hndr/error.hpp"
#include "hndr/textio.hpp"

namespace hndr {

using Eigen::Index;
using Eigen::MatrixXd;
using nlohmann::json;

std::map<std::string, std::string> parse_header(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::string_view sv = line;
  if (sv.empty() || sv.front() != '#') return kv;
  sv.remove_prefix(1);
  for (auto token : split(trim(sv), ' ')) {
    auto eq = token.find('=');
    if (eq == std::string_view::npos) continue;
    kv.emplace(std::string(token.substr(0, eq)), std::string(token.substr(eq + 1)));
  }
  return kv;
}

void write_embedding(const Embedding& e, const EntityIdMap& ids, const std::string& config_hash,
                     const std::filesystem::path& path) {
  if (static_cast<std::size_t>(e.values.rows()) != ids.size()) {
    throw ValidationError("embedding " + e.network + " row count does not match its ID map");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write: " + path.string());
  out << "# kind=" << to_string(e.kind) << " network=" << e.network << " rows=" << e.values.rows()
      << " dims=" << e.values.cols() << " config_hash=" << config_hash << '\n';
  for (Index i = 0; i < e.values.rows(); ++i) {
    out << ids.name(static_cast<std::size_t>(i));
    for (Index j = 0; j < e.values.cols(); ++j) out << '\t' << format_double(e.values(i, j));
    out << '\n';
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

LoadedEmbedding read_embedding(const std::filesystem::path& path, const EntityIdMap& ids) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embedding file: " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = parse_header(line);
  for (const char* k : {"kind", "network", "rows", "dims", "config_hash"}) {
    if (!header.contains(k)) {
      throw ValidationError(path.string() + ": header lacks '" + std::string(k) + "'");
    }
  }
  LoadedEmbedding le;
  le.config_hash = header.at("config_hash");
  Embedding& e = le.embedding;
  e.network = header.at("network");
  e.kind = parse_entity_kind(header.at("kind"));
  e.id_fingerprint = ids.fingerprint();
  const long rows = std::stol(header.at("rows"));
  const long dims = std::stol(header.at("dims"));
  if (e.kind != ids.kind() || static_cast<std::size_t>(rows) != ids.size()) {
    throw ValidationError(path.string() + ": embedding does not match the " +
                          std::string(to_string(ids.kind())) + " ID map");
  }
  e.values.resize(rows, dims);
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw ValidationError(path.string() + ": truncated");
    auto fields = split(line, '\t');
    if (static_cast<long>(fields.size()) != dims + 1) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 2) + ": expected " +
                            std::to_string(dims + 1) + " fields");
    }
    if (fields[0] != ids.name(static_cast<std::size_t>(i))) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 2) + ": row ID '" +
                            std::string(fields[0]) + "' out of order");
    }
    for (long j = 0; j < dims; ++j) {
      double v;
      if (!parse_double(fields[static_cast<std::size_t>(j + 1)], v) || !std::isfinite(v)) {
        throw ValidationError(path.string() + ":" + std::to_string(i + 2) + ": bad value");
      }
      e.values(i, j) = v;
    }
  }
  return le;
}

namespace {

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

MatrixXd matrix_from(const json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string("model field ") + what + " is not a matrix");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows ? static_cast<Index>(j[0].size()) : 0;
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(j[static_cast<std::size_t>(i)].size()) != cols) {
      throw ValidationError(std::string("model field ") + what + " is ragged");
    }
    for (Index k = 0; k < cols; ++k) {
      m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

json row_json(const Eigen::RowVectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::RowVectorXd row_from(const json& j) {
  Eigen::RowVectorXd v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json scaling_json(const std::optional<ColumnScaling>& s) {
  if (!s) return nullptr;
  return {{"mean", row_json(s->mean)}, {"scale", row_json(s->scale)}};
}

std::optional<ColumnScaling> scaling_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return ColumnScaling{row_from(j.at("mean")), row_from(j.at("scale"))};
}

json provenance_json(const std::vector<std::pair<std::string, int>>& p) {
  json a = json::array();
  for (const auto& [name, dims] : p) a.push_back({{"network", name}, {"dims", dims}});
  return a;
}

std::vector<std::pair<std::string, int>> provenance_from(const json& j) {
  std::vector<std::pair<std::string, int>> p;
  for (const auto& e : j) p.emplace_back(e.at("network").get<std::string>(), e.at("dims").get<int>());
  return p;
}

}  // namespace

void write_model(const ModelFile& mf, const std::filesystem::path& path) {
  json j;
  j["config_hash"] = mf.config_hash;
  j["rank"] = mf.model.W.cols();
  j["W"] = matrix_json(mf.model.W);
  j["H"] = matrix_json(mf.model.H);
  j["objective_history"] = mf.model.objective_history;
  j["drug_scaling"] = scaling_json(mf.model.drug_scaling);
  j["protein_scaling"] = scaling_json(mf.model.protein_scaling);
  j["drug_provenance"] = provenance_json(mf.drug_provenance);
  j["protein_provenance"] = provenance_json(mf.protein_provenance);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write: " + path.string());
  out << j.dump(1) << '\n';
}

ModelFile read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file: " + path.string());
  json j;
  try {
    in >> j;
    ModelFile mf;
    mf.config_hash = j.at("config_hash").get<std::string>();
    mf.model.W = matrix_from(j.at("W"), "W");
    mf.model.H = matrix_from(j.at("H"), "H");
    mf.model.objective_history = j.at("objective_history").get<std::vector<double>>();
    mf.model.drug_scaling = scaling_from(j.at("drug_scaling"));
    mf.model.protein_scaling = scaling_from(j.at("protein_scaling"));
    mf.drug_provenance = provenance_from(j.at("drug_provenance"));
    mf.protein_provenance = provenance_from(j.at("protein_provenance"));
    return mf;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": malformed model file: " + e.what());
  }
}

void write_curve(const std::vector<CurvePoint>& pts, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write: " + path.string());
  out << "threshold,x,y\n";
  for (const auto& p : pts) {
    out << (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) << ','
        << format_double(p.x) << ',' << format_double(p.y) << '\n';
  }
}

void write_associations(const std::vector<Association>& rows, const std::string& config_hash,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write: " + path.string());
  out << "# config_hash=" << config_hash << '\n';
  for (const auto& a : rows) out << a.drug << '\t' << a.protein << '\t' << format_double(a.score) << '\n';
}

std::vector<std::string> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open ID list: " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    auto id = trim(line);
    if (!id.empty() && id.front() != '#') ids.emplace_back(id);
  }
  return ids;
}

}  // namespace hndr

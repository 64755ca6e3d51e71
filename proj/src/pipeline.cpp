#include "hndr/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <set>

#include "hndr/artifacts.hpp"
#include "hndr/error.hpp"
#include "hndr/hash.hpp"
#include "hndr/rng.hpp"
#include "hndr/textio.hpp"
#include "parallel.hpp"

namespace hndr {

namespace fs = std::filesystem;
using Eigen::MatrixXd;
using nlohmann::json;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::similarity:
      return "similarity";
    case Stage::embed:
      return "embed";
    case Stage::fit:
      return "fit";
    case Stage::evaluate:
      return "evaluate";
    case Stage::rank:
      return "rank";
  }
  return "unknown";
}

// --- config ----------------------------------------------------------------

namespace {

Axis parse_axis(const std::string& s) {
  if (s == "rows") return Axis::rows;
  if (s == "cols") return Axis::cols;
  throw ValidationError("axis must be 'rows' or 'cols', got '" + s + "'");
}

EmbedConfig parse_embed(const json& j, EmbedConfig c) {
  c.surf.alpha = j.value("surf_alpha", c.surf.alpha);
  c.surf.steps = j.value("surf_steps", c.surf.steps);
  c.ppmi_shift = j.value("ppmi_shift", c.ppmi_shift);
  if (j.contains("hidden")) c.sdae.layer_sizes = j.at("hidden").get<std::vector<int>>();
  c.sdae.noise_rate = j.value("noise_rate", c.sdae.noise_rate);
  c.sdae.lambda = j.value("lambda", c.sdae.lambda);
  c.sdae.learning_rate = j.value("learning_rate", c.sdae.learning_rate);
  c.sdae.epochs = j.value("epochs", c.sdae.epochs);
  c.sdae.batch_size = j.value("batch_size", c.sdae.batch_size);
  return c;
}

json embed_json(const EmbedConfig& c) {
  return {{"surf_alpha", c.surf.alpha},       {"surf_steps", c.surf.steps},
          {"ppmi_shift", c.ppmi_shift},       {"hidden", c.sdae.layer_sizes},
          {"noise_rate", c.sdae.noise_rate},  {"lambda", c.sdae.lambda},
          {"learning_rate", c.sdae.learning_rate}, {"epochs", c.sdae.epochs},
          {"batch_size", c.sdae.batch_size}};
}

json completion_json(const CompletionConfig& c) {
  return {{"rank", c.rank},         {"alpha", c.alpha},
          {"lambda", c.lambda},     {"max_iters", c.max_iters},
          {"tol", c.tol},           {"negative_ratio", c.negative_ratio},
          {"standardize", c.standardize}};
}

}  // namespace

const EmbedConfig& PipelineConfig::embed_config_for(const std::string& network) const {
  auto it = embed_overrides.find(network);
  return it == embed_overrides.end() ? embed_defaults : it->second;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path.string());
  PipelineConfig c;
  c.config_path = path;
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  // Default embedding widths; the input width is prepended per network.
  c.embed_defaults.sdae.layer_sizes = {512, 128};
  try {
    json j = json::parse(in);
    c.seed = j.value("seed", std::uint64_t{0});
    c.output_dir = resolve(j.value("output_dir", std::string("out")));
    for (const auto& [kind, p] : j.at("id_maps").items()) {
      c.id_maps[parse_entity_kind(kind)] = resolve(p.get<std::string>());
    }
    for (const auto& n : j.value("networks", json::array())) {
      NetworkSpec s;
      s.name = n.at("name").get<std::string>();
      s.rows = parse_entity_kind(n.at("rows").get<std::string>());
      s.cols = parse_entity_kind(n.at("cols").get<std::string>());
      s.path = resolve(n.at("path").get<std::string>());
      s.symmetric = n.value("symmetric", false);
      s.embed = n.value("embed", false);
      c.networks.push_back(std::move(s));
    }
    for (const auto& n : j.value("jaccard", json::array())) {
      JaccardSpec s;
      s.name = n.at("name").get<std::string>();
      s.source = n.at("source").get<std::string>();
      s.axis = parse_axis(n.value("axis", std::string("rows")));
      s.cutoff = n.value("cutoff", 0.0);
      c.jaccard.push_back(std::move(s));
    }
    for (const auto& n : j.value("similarity_files", json::array())) {
      SimilarityFileSpec s;
      s.name = n.at("name").get<std::string>();
      s.kind = parse_entity_kind(n.at("kind").get<std::string>());
      s.path = resolve(n.at("path").get<std::string>());
      c.similarity_files.push_back(std::move(s));
    }
    c.interactions = j.at("interactions").get<std::string>();
    if (j.contains("embedding")) {
      const auto& e = j.at("embedding");
      c.embed_defaults = parse_embed(e, c.embed_defaults);
      const json per_network = e.value("per_network", json::object());
      for (const auto& [name, o] : per_network.items()) {
        c.embed_overrides[name] = parse_embed(o, c.embed_defaults);
      }
    }
    if (j.contains("completion")) {
      const auto& m = j.at("completion");
      auto& cc = c.completion;
      cc.rank = m.value("rank", cc.rank);
      cc.alpha = m.value("alpha", cc.alpha);
      cc.lambda = m.value("lambda", cc.lambda);
      cc.max_iters = m.value("max_iters", cc.max_iters);
      cc.tol = m.value("tol", cc.tol);
      cc.negative_ratio = m.value("negative_ratio", cc.negative_ratio);
      cc.standardize = m.value("standardize", cc.standardize);
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      c.folds = e.value("folds", c.folds);
      c.repeats = e.value("repeats", c.repeats);
      if (e.contains("external_set") && !e.at("external_set").is_null()) {
        c.external_set = resolve(e.at("external_set").get<std::string>());
      }
      const auto agg = e.value("aggregation", std::string("max"));
      if (agg == "max") {
        c.aggregation = DrugAggregation::max;
      } else if (agg == "mean") {
        c.aggregation = DrugAggregation::mean;
      } else {
        throw ValidationError("aggregation must be 'max' or 'mean'");
      }
    }
    if (j.contains("ranking")) {
      const auto& r = j.at("ranking");
      if (r.contains("protein_subset") && !r.at("protein_subset").is_null()) {
        c.protein_subset = resolve(r.at("protein_subset").get<std::string>());
      }
      c.top_k = r.value("top_k", c.top_k);
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": bad config: " + e.what());
  }
  return c;
}

void PipelineConfig::validate() const {
  auto need = [](const fs::path& p) {
    if (!fs::exists(p)) throw ValidationError("missing input file: " + p.string());
  };
  for (auto kind : {EntityKind::drug, EntityKind::protein}) {
    if (!id_maps.contains(kind)) {
      throw ValidationError("config lacks an ID map for " + std::string(to_string(kind)));
    }
  }
  for (const auto& [kind, p] : id_maps) need(p);
  std::set<std::string> names;
  auto unique = [&](const std::string& n) {
    if (!names.insert(n).second) throw ValidationError("network name '" + n + "' used twice");
  };
  auto has_map = [&](EntityKind k, const std::string& who) {
    if (!id_maps.contains(k)) {
      throw ValidationError(who + " needs an ID map for " + std::string(to_string(k)));
    }
  };
  for (const auto& n : networks) {
    unique(n.name);
    need(n.path);
    has_map(n.rows, n.name);
    has_map(n.cols, n.name);
    if (n.embed && n.rows != n.cols) {
      throw ValidationError(n.name + ": only square networks can be embedded");
    }
    if (n.embed && n.rows != EntityKind::drug && n.rows != EntityKind::protein) {
      throw ValidationError(n.name + ": only drug or protein networks can be embedded");
    }
  }
  for (const auto& s : jaccard) {
    unique(s.name);
    auto src = std::find_if(networks.begin(), networks.end(),
                            [&](const NetworkSpec& n) { return n.name == s.source; });
    if (src == networks.end()) {
      throw ValidationError(s.name + ": source network '" + s.source + "' not configured");
    }
    const EntityKind k = s.axis == Axis::rows ? src->rows : src->cols;
    if (k != EntityKind::drug && k != EntityKind::protein) {
      throw ValidationError(s.name + ": Jaccard entities must be drugs or proteins");
    }
  }
  for (const auto& s : similarity_files) {
    unique(s.name);
    need(s.path);
    has_map(s.kind, s.name);
  }
  auto inter = std::find_if(networks.begin(), networks.end(),
                            [&](const NetworkSpec& n) { return n.name == interactions; });
  if (inter == networks.end()) {
    throw ValidationError("interaction network '" + interactions + "' not configured");
  }
  if (inter->rows != EntityKind::drug || inter->cols != EntityKind::protein) {
    throw ValidationError("interaction network must be drug x protein");
  }
  embed_defaults.surf.validate();
  for (const auto& [name, e] : embed_overrides) {
    if (!names.contains(name)) throw ValidationError("embedding override for unknown network " + name);
    e.surf.validate();
    e.sdae.validate(false);
  }
  embed_defaults.sdae.validate(false);
  completion.validate();
  if (folds < 2 || repeats < 1) throw ValidationError("need folds >= 2 and repeats >= 1");
  if (external_set) need(*external_set);
  if (protein_subset) need(*protein_subset);
  if (top_k < 1) throw ValidationError("top_k must be >= 1");
}

// --- stage machinery --------------------------------------------------------

namespace {

struct EmbedSource {
  std::string name;
  EntityKind kind;
  enum class From { network, jaccard, file } from;
  fs::path input;  // edge list (network/file) or similarity output (jaccard)
};

class Runner {
 public:
  Runner(const PipelineConfig& cfg, const RunOptions& opts) : cfg_(cfg), opts_(opts) {
    cfg_.validate();
    compute_hashes();
  }

  StageResult run(Stage stage) {
    const std::string& hash = hashes_.at(stage);
    for (Stage up : upstream(stage)) require_current(up, stage);
    StageResult res{stage, hash, false};
    if (!opts_.force && is_current(stage)) {
      res.skipped = true;
      log(stage, "up to date (" + hash + ")");
      return res;
    }
    fs::create_directories(dir(stage));
    std::vector<fs::path> outputs;
    switch (stage) {
      case Stage::similarity:
        outputs = run_similarity();
        break;
      case Stage::embed:
        outputs = run_embed();
        break;
      case Stage::fit:
        outputs = run_fit();
        break;
      case Stage::evaluate:
        outputs = run_evaluate();
        break;
      case Stage::rank:
        outputs = run_rank();
        break;
    }
    write_manifest(stage, outputs);
    log(stage, "done (" + hash + ")");
    return res;
  }

  FeatureMatrix features(EntityKind k) {
    require_current(Stage::embed, Stage::fit);
    std::vector<Embedding> parts;
    for (const auto& s : embed_sources()) {
      if (s.kind != k) continue;
      const fs::path p = dir(Stage::embed) / (s.name + ".tsv");
      auto le = read_embedding(p, ids(k));
      if (le.config_hash != hashes_.at(Stage::embed)) {
        throw ValidationError(p.string() + ": artifact config hash does not match the embed stage");
      }
      parts.push_back(std::move(le.embedding));
    }
    if (parts.empty()) {
      throw ValidationError("no " + std::string(to_string(k)) + " networks are configured for embedding");
    }
    return fuse_embeddings(parts);
  }

  std::vector<Cell> positives() {
    const auto& spec = network(cfg_.interactions);
    const Network net =
        load_edge_list(spec.path, ids(EntityKind::drug), ids(EntityKind::protein), false, spec.name);
    std::vector<Cell> cells;
    for (const auto& e : net.edges) {
      if (e.weight > 0.0) {
        cells.push_back({static_cast<std::uint32_t>(e.row), static_cast<std::uint32_t>(e.col)});
      }
    }
    if (cells.empty()) throw ValidationError(spec.path.string() + ": no drug-protein interactions");
    return cells;
  }

 private:
  const PipelineConfig& cfg_;
  RunOptions opts_;
  std::map<Stage, std::string> hashes_;
  std::map<fs::path, std::string> file_hashes_;
  std::map<EntityKind, EntityIdMap> ids_;

  void log(Stage s, const std::string& msg) const {
    if (opts_.log) *opts_.log << "[" << to_string(s) << "] " << msg << '\n';
  }

  fs::path dir(Stage s) const { return cfg_.output_dir / std::string(to_string(s)); }
  fs::path manifest(Stage s) const { return dir(s) / "manifest.json"; }

  static std::vector<Stage> upstream(Stage s) {
    switch (s) {
      case Stage::similarity:
        return {};
      case Stage::embed:
        return {Stage::similarity};
      case Stage::fit:
        return {Stage::embed};
      case Stage::evaluate:
        return {Stage::embed, Stage::fit};
      case Stage::rank:
        return {Stage::embed, Stage::fit};
    }
    return {};
  }

  const std::string& file_hash(const fs::path& p) {
    auto it = file_hashes_.find(p);
    if (it == file_hashes_.end()) it = file_hashes_.emplace(p, hash_file(p)).first;
    return it->second;
  }

  const NetworkSpec& network(const std::string& name) const {
    for (const auto& n : cfg_.networks) {
      if (n.name == name) return n;
    }
    throw ValidationError("network '" + name + "' not configured");
  }

  const EntityIdMap& ids(EntityKind k) {
    auto it = ids_.find(k);
    if (it == ids_.end()) it = ids_.emplace(k, load_id_map(cfg_.id_maps.at(k), k)).first;
    return it->second;
  }

  std::vector<EmbedSource> embed_sources() const {
    std::vector<EmbedSource> out;
    for (const auto& n : cfg_.networks) {
      if (n.embed) out.push_back({n.name, n.rows, EmbedSource::From::network, n.path});
    }
    for (const auto& s : cfg_.jaccard) {
      const auto& src = network(s.source);
      out.push_back({s.name, s.axis == Axis::rows ? src.rows : src.cols, EmbedSource::From::jaccard,
                     dir(Stage::similarity) / (s.name + ".tsv")});
    }
    for (const auto& s : cfg_.similarity_files) {
      out.push_back({s.name, s.kind, EmbedSource::From::file, s.path});
    }
    return out;
  }

  void hash_id_maps(Fnv64& h) {
    for (const auto& [kind, p] : cfg_.id_maps) h.update(to_string(kind)).update(file_hash(p));
  }

  void compute_hashes() {
    auto start = [&](Stage s) {
      Fnv64 h;
      h.update(std::string_view(kCodeVersion)).update(to_string(s)).update(cfg_.seed);
      hash_id_maps(h);
      return h;
    };
    {
      Fnv64 h = start(Stage::similarity);
      json j = json::array();
      for (const auto& s : cfg_.jaccard) {
        const auto& src = network(s.source);
        j.push_back({{"name", s.name}, {"source", s.source}, {"axis", s.axis == Axis::rows ? "rows" : "cols"},
                     {"cutoff", s.cutoff}, {"source_rows", to_string(src.rows)},
                     {"source_cols", to_string(src.cols)}, {"source_hash", file_hash(src.path)}});
      }
      h.update(j.dump());
      hashes_[Stage::similarity] = h.hex();
    }
    {
      Fnv64 h = start(Stage::embed);
      h.update(hashes_[Stage::similarity]);
      json j = json::array();
      for (const auto& s : embed_sources()) {
        json e = {{"name", s.name}, {"kind", to_string(s.kind)},
                  {"config", embed_json(cfg_.embed_config_for(s.name))}};
        if (s.from != EmbedSource::From::jaccard) e["input_hash"] = file_hash(s.input);
        if (s.from == EmbedSource::From::network) e["symmetric"] = network(s.name).symmetric;
        j.push_back(std::move(e));
      }
      h.update(j.dump());
      hashes_[Stage::embed] = h.hex();
    }
    {
      Fnv64 h = start(Stage::fit);
      h.update(hashes_[Stage::embed]);
      h.update(completion_json(cfg_.completion).dump());
      h.update(cfg_.interactions).update(file_hash(network(cfg_.interactions).path));
      hashes_[Stage::fit] = h.hex();
    }
    const std::string subset_hash = cfg_.protein_subset ? file_hash(*cfg_.protein_subset) : "all";
    {
      Fnv64 h = start(Stage::evaluate);
      h.update(hashes_[Stage::embed]).update(hashes_[Stage::fit]);
      json j = {{"folds", cfg_.folds}, {"repeats", cfg_.repeats},
                {"aggregation", cfg_.aggregation == DrugAggregation::max ? "max" : "mean"},
                {"external", cfg_.external_set ? file_hash(*cfg_.external_set) : "none"},
                {"subset", subset_hash}};
      h.update(j.dump());
      hashes_[Stage::evaluate] = h.hex();
    }
    {
      Fnv64 h = start(Stage::rank);
      h.update(hashes_[Stage::embed]).update(hashes_[Stage::fit]);
      json j = {{"top_k", cfg_.top_k},
                {"aggregation", cfg_.aggregation == DrugAggregation::max ? "max" : "mean"},
                {"subset", subset_hash}};
      h.update(j.dump());
      hashes_[Stage::rank] = h.hex();
    }
  }

  std::optional<json> read_manifest(Stage s) const {
    std::ifstream in(manifest(s));
    if (!in) return std::nullopt;
    try {
      return std::optional<json>(std::in_place, json::parse(in));
    } catch (const json::exception&) {
      return std::nullopt;
    }
  }

  bool is_current(Stage s) {
    auto m = read_manifest(s);
    if (!m || m->value("hash", std::string()) != hashes_.at(s)) return false;
    const json outputs = m->value("outputs", json::object());
    for (const auto& [name, h] : outputs.items()) {
      const fs::path p = dir(s) / name;
      if (!fs::exists(p) || hash_file(p) != h.get<std::string>()) return false;
    }
    return true;
  }

  void require_current(Stage up, Stage from) {
    auto m = read_manifest(up);
    if (!m) {
      throw ValidationError(std::string(to_string(from)) + " needs the output of stage '" +
                            std::string(to_string(up)) + "' (missing " + manifest(up).string() + ")");
    }
    if (!is_current(up)) {
      throw ValidationError(std::string(to_string(from)) + ": artifacts of stage '" +
                            std::string(to_string(up)) +
                            "' do not match the current config hash; rerun that stage");
    }
  }

  void write_manifest(Stage s, const std::vector<fs::path>& outputs) const {
    json out = json::object();
    for (const auto& p : outputs) out[p.filename().string()] = hash_file(p);
    json m = {{"stage", to_string(s)}, {"hash", hashes_.at(s)}, {"code_version", kCodeVersion},
              {"outputs", out}};
    std::ofstream f(manifest(s), std::ios::binary);
    f << m.dump(1) << '\n';
    if (!f) throw ValidationError("cannot write " + manifest(s).string());
  }

  // --- stages ---

  std::vector<fs::path> run_similarity() {
    std::vector<fs::path> outputs;
    const std::string& hash = hashes_.at(Stage::similarity);
    for (const auto& s : cfg_.jaccard) {
      const auto& src = network(s.source);
      const Network assoc = load_edge_list(src.path, ids(src.rows), ids(src.cols), src.symmetric, src.name);
      SimilarityNetwork sim = jaccard_similarity(assoc, s.axis, s.cutoff);
      sim.network.name = s.name;
      const EntityKind k = s.axis == Axis::rows ? src.rows : src.cols;
      if (!sim.isolated.empty()) {
        log(Stage::similarity, s.name + ": " + std::to_string(sim.isolated.size()) +
                                   " isolated entities get zero similarity (first: " +
                                   ids(k).name(sim.isolated.front()) + ")");
      }
      const fs::path out = dir(Stage::similarity) / (s.name + ".tsv");
      write_edge_list(sim.network, ids(k), ids(k), out,
                      "config_hash=" + hash + " source=" + s.source + " cutoff=" + format_double(s.cutoff));
      outputs.push_back(out);
      log(Stage::similarity, s.name + ": " + std::to_string(sim.network.edge_count()) + " pairs");
    }
    return outputs;
  }

  Network load_embed_input(const EmbedSource& s) {
    const EntityIdMap& m = ids(s.kind);
    switch (s.from) {
      case EmbedSource::From::network: {
        const auto& spec = network(s.name);
        return load_edge_list(spec.path, m, m, spec.symmetric, s.name);
      }
      case EmbedSource::From::jaccard: {
        check_header_hash(s.input, hashes_.at(Stage::similarity));
        return load_similarity(s.input, m, s.name).network;
      }
      case EmbedSource::From::file:
        return load_similarity(s.input, m, s.name).network;
    }
    throw ValidationError("unreachable");
  }

  static void check_header_hash(const fs::path& p, const std::string& expected) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    const auto kv = parse_header(line);
    auto it = kv.find("config_hash");
    if (it == kv.end() || it->second != expected) {
      throw ValidationError(p.string() + ": artifact config hash does not match (expected " + expected +
                            ")");
    }
  }

  std::vector<fs::path> run_embed() {
    const auto sources = embed_sources();
    for (auto k : {EntityKind::drug, EntityKind::protein}) ids(k);  // load before threading
    std::vector<Network> inputs;
    for (const auto& s : sources) {
      try {
        inputs.push_back(load_embed_input(s));
      } catch (const ValidationError& e) {
        throw ValidationError("network=" + s.name + " " + e.what());
      }
    }
    const std::string& hash = hashes_.at(Stage::embed);
    std::vector<fs::path> outputs(sources.size());
    detail::run_parallel(sources.size(), opts_.jobs, [&](std::size_t i) {
      const auto& s = sources[i];
      EmbedConfig ec = cfg_.embed_config_for(s.name);
      ec.sdae.seed = Rng::derive(cfg_.seed, "embed/" + s.name).next_u64();
      try {
        const Embedding e = embed_network(inputs[i], ids_.at(s.kind), ec);
        outputs[i] = dir(Stage::embed) / (s.name + ".tsv");
        write_embedding(e, ids_.at(s.kind), hash, outputs[i]);
      } catch (const ValidationError& e) {
        throw ValidationError("network=" + s.name + " " + e.what());
      } catch (const NumericalError& e) {
        throw NumericalError("network=" + s.name + " " + e.what());
      }
    });
    log(Stage::embed, std::to_string(sources.size()) + " networks embedded");
    return outputs;
  }

  ModelFile load_model() {
    const fs::path p = dir(Stage::fit) / "model.json";
    ModelFile mf = read_model(p);
    if (mf.config_hash != hashes_.at(Stage::fit)) {
      throw ValidationError(p.string() + ": artifact config hash does not match the fit stage");
    }
    return mf;
  }

  std::vector<fs::path> run_fit() {
    const FeatureMatrix D = features(EntityKind::drug);
    const FeatureMatrix P = features(EntityKind::protein);
    const auto pos = positives();
    CompletionConfig cc = cfg_.completion;
    cc.seed = Rng::derive(cfg_.seed, "fit/init").next_u64();
    Rng rng = Rng::derive(cfg_.seed, "fit/negatives");
    ModelFile mf;
    mf.model = train_completion(pos, static_cast<std::size_t>(D.values.rows()),
                                static_cast<std::size_t>(P.values.rows()), D.values, P.values, cc, rng);
    mf.config_hash = hashes_.at(Stage::fit);
    mf.drug_provenance = D.provenance;
    mf.protein_provenance = P.provenance;
    const fs::path out = dir(Stage::fit) / "model.json";
    write_model(mf, out);
    log(Stage::fit, std::to_string(pos.size()) + " positives, " +
                        std::to_string(mf.model.objective_history.size() - 1) + " iterations, objective " +
                        format_double(mf.model.objective_history.back()));
    return {out};
  }

  std::vector<std::size_t> subset_indices() {
    const EntityIdMap& proteins = ids(EntityKind::protein);
    std::vector<std::size_t> idx;
    if (!cfg_.protein_subset) {
      idx.resize(proteins.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      return idx;
    }
    for (const auto& id : read_id_list(*cfg_.protein_subset)) idx.push_back(proteins.index_of(id));
    if (idx.empty()) throw ValidationError(cfg_.protein_subset->string() + ": protein subset is empty");
    return idx;
  }

  // Rows of the scored drug x subset block plus the drug ranking it implies.
  struct Scored {
    MatrixXd block;
    std::vector<std::string> protein_ids;
    std::vector<RankedDrug> ranking;
  };

  Scored score_subset(const ModelFile& mf) {
    const FeatureMatrix D = features(EntityKind::drug);
    const FeatureMatrix P = features(EntityKind::protein);
    const MatrixXd Dm = mf.model.prepare_drugs(D.values);
    const MatrixXd Pm = mf.model.prepare_proteins(P.values);
    if (Dm.cols() != mf.model.W.rows() || Pm.cols() != mf.model.H.rows()) {
      throw ValidationError("model dimensions do not match the current features");
    }
    Scored s;
    const auto subset = subset_indices();
    s.block = score_matrix(Dm, mf.model, Pm, std::nullopt, subset);
    for (std::size_t i : subset) s.protein_ids.push_back(ids(EntityKind::protein).name(i));
    const auto agg = aggregate_drug_scores(s.block, cfg_.aggregation);
    const auto& drugs = ids(EntityKind::drug);
    for (std::size_t i = 0; i < agg.size(); ++i) s.ranking.push_back({drugs.name(i), agg[i]});
    std::stable_sort(s.ranking.begin(), s.ranking.end(), [](const RankedDrug& a, const RankedDrug& b) {
      return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    return s;
  }

  static json report_json(const MetricReport& r) {
    json folds = json::array();
    for (const auto& f : r.per_fold) {
      folds.push_back({{"repeat", f.repeat}, {"fold", f.fold}, {"auroc", f.auroc}, {"aupr", f.aupr}});
    }
    return {{"auroc", r.auroc},
            {"aupr", r.aupr},
            {"pooled_auroc", r.pooled_auroc},
            {"pooled_aupr", r.pooled_aupr},
            {"per_fold", folds}};
  }

  std::vector<fs::path> run_evaluate() {
    const FeatureMatrix D = features(EntityKind::drug);
    const FeatureMatrix P = features(EntityKind::protein);
    const auto pos = positives();
    const FoldPlan plan =
        make_folds(pos.size(), cfg_.folds, cfg_.repeats, Rng::derive(cfg_.seed, "evaluate/folds").next_u64());
    CompletionConfig cc = cfg_.completion;
    cc.seed = Rng::derive(cfg_.seed, "evaluate/cv").next_u64();
    const MetricReport cv =
        cross_validate(pos, static_cast<std::size_t>(D.values.rows()), static_cast<std::size_t>(P.values.rows()),
                       D.values, P.values, cc, plan, opts_.jobs);
    log(Stage::evaluate, "CV AUROC " + format_double(cv.auroc) + " AUPR " + format_double(cv.aupr));

    const fs::path d = dir(Stage::evaluate);
    std::vector<fs::path> outputs{d / "metrics.json", d / "cv_roc.csv", d / "cv_pr.csv"};
    write_curve(cv.roc, outputs[1]);
    write_curve(cv.pr, outputs[2]);

    json cvj = report_json(cv);
    cvj["folds"] = cfg_.folds;
    cvj["repeats"] = cfg_.repeats;
    json metrics = {{"config_hash", hashes_.at(Stage::evaluate)}, {"seed", cfg_.seed}, {"cv", cvj},
                    {"external", nullptr}};
    if (cfg_.external_set) {
      const auto ext_ids = read_id_list(*cfg_.external_set);
      if (ext_ids.empty()) throw ValidationError(cfg_.external_set->string() + ": external set is empty");
      for (const auto& id : ext_ids) ids(EntityKind::drug).index_of(id);
      const Scored s = score_subset(load_model());
      const MetricReport ext = external_validate(s.ranking, ext_ids);
      json ej = report_json(ext);
      ej.erase("per_fold");
      ej["size"] = ext_ids.size();
      metrics["external"] = ej;
      outputs.push_back(d / "external_roc.csv");
      outputs.push_back(d / "external_pr.csv");
      write_curve(ext.roc, outputs[3]);
      write_curve(ext.pr, outputs[4]);
      log(Stage::evaluate, "external AUROC " + format_double(ext.auroc) + " AUPR " + format_double(ext.aupr));
    }
    std::ofstream f(outputs[0], std::ios::binary);
    f << metrics.dump(1) << '\n';
    if (!f) throw ValidationError("cannot write " + outputs[0].string());
    return outputs;
  }

  std::vector<fs::path> run_rank() {
    const Scored s = score_subset(load_model());
    const auto& drugs = ids(EntityKind::drug).names();
    const std::string& hash = hashes_.at(Stage::rank);
    const fs::path d = dir(Stage::rank);
    std::vector<fs::path> outputs{d / "top_associations.tsv", d / "drug_ranking.tsv", d / "scores.tsv"};
    write_associations(top_k_associations(s.block, drugs, s.protein_ids, cfg_.top_k), hash, outputs[0]);
    {
      std::ofstream f(outputs[1], std::ios::binary);
      f << "# config_hash=" << hash << '\n';
      for (const auto& r : s.ranking) f << r.id << '\t' << format_double(r.score) << '\n';
      if (!f) throw ValidationError("cannot write " + outputs[1].string());
    }
    const auto cells = static_cast<std::size_t>(s.block.size());
    write_associations(top_k_associations(s.block, drugs, s.protein_ids, cells), hash, outputs[2]);
    log(Stage::rank, "top " + std::to_string(cfg_.top_k) + " of " + std::to_string(cells) + " pairs");
    return outputs;
  }
};

template <typename Fn>
auto with_stage_context(Stage s, Fn&& fn) {
  const std::string tag = "stage=" + std::string(to_string(s)) + " ";
  try {
    return fn();
  } catch (const NumericalError& e) {
    throw NumericalError(tag + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(tag + e.what());
  } catch (const fs::filesystem_error& e) {
    throw ValidationError(tag + e.what());
  }
}

}  // namespace

StageResult run_stage(const PipelineConfig& cfg, Stage stage, const RunOptions& opts) {
  return with_stage_context(stage, [&] {
    Runner r(cfg, opts);
    return r.run(stage);
  });
}

FeatureMatrix load_stage_features(const PipelineConfig& cfg, EntityKind kind) {
  Runner r(cfg, {});
  return r.features(kind);
}

std::vector<Cell> load_interactions(const PipelineConfig& cfg) {
  Runner r(cfg, {});
  return r.positives();
}

std::vector<StageResult> run_pipeline(const PipelineConfig& cfg, const RunOptions& opts) {
  std::vector<StageResult> out;
  for (Stage s : {Stage::similarity, Stage::embed, Stage::fit, Stage::evaluate, Stage::rank}) {
    out.push_back(run_stage(cfg, s, opts));
  }
  return out;
}

}  // namespace hndr

#include <doctest.h>

#include <cstdlib>
#include <json.hpp>
#include <sstream>

#include "hndr/artifacts.hpp"
#include "hndr/error.hpp"
#include "hndr/fixture.hpp"
#include "hndr/pipeline.hpp"
#include "test_util.hpp"

using namespace hndr;
namespace fs = std::filesystem;
using nlohmann::json;
using testutil::read_text;
using testutil::TempDir;
using testutil::write_text;

namespace {

// The fixture with cheaper embedding and evaluation settings.
fs::path small_fixture(const fs::path& dir, const std::function<void(json&)>& edit = {}) {
  const fs::path cfg = write_fixture(dir, {});
  json j = json::parse(read_text(cfg));
  j["embedding"]["epochs"] = 15;
  j["evaluation"]["repeats"] = 1;
  j["completion"]["max_iters"] = 15;
  if (edit) edit(j);
  write_text(cfg, j.dump(2));
  return cfg;
}

std::map<std::string, std::string> snapshot(const fs::path& out) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(out))
    if (e.is_regular_file()) files[fs::relative(e.path(), out).string()] = read_text(e.path());
  return files;
}

int count_data_lines(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::string line;
  int n = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++n;
  return n;
}

#ifdef HNDR_CLI
struct CliResult {
  int code;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string(HNDR_CLI) + " " + args + " 2> " + err.string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text(err)};
}
#endif

}  // namespace

TEST_CASE("config loading resolves paths and validates") {
  TempDir tmp;
  const auto cfg_path = small_fixture(tmp.path());
  const auto cfg = load_pipeline_config(cfg_path);
  CHECK(cfg.output_dir == tmp.path() / "out");
  CHECK(cfg.networks.size() == 5);
  CHECK(cfg.jaccard.size() == 2);
  CHECK(cfg.similarity_files.size() == 12);
  CHECK(cfg.embed_defaults.sdae.epochs == 15);
  CHECK(cfg.embed_defaults.sdae.layer_sizes == std::vector<int>{24, 8});
  CHECK(cfg.completion.rank == 8);
  CHECK(cfg.protein_subset.has_value());
  CHECK_NOTHROW(cfg.validate());

  auto broken = cfg;
  broken.networks[0].path = tmp / "missing.tsv";
  CHECK_THROWS_AS(broken.validate(), ValidationError);
  broken = cfg;
  broken.interactions = "drug_drug";
  CHECK_THROWS_AS(broken.validate(), ValidationError);
  broken = cfg;
  broken.jaccard[0].source = "nope";
  CHECK_THROWS_AS(broken.validate(), ValidationError);

  write_text(tmp / "bad.json", "{ not json");
  CHECK_THROWS_AS(load_pipeline_config(tmp / "bad.json"), ValidationError);
  CHECK_THROWS_AS(load_pipeline_config(tmp / "absent.json"), ValidationError);
}

TEST_CASE("stages run in order, cache, and resume") {
  TempDir tmp;
  const auto cfg = load_pipeline_config(small_fixture(tmp.path()));

  // Downstream stages refuse to run without their inputs.
  CHECK_THROWS_AS(run_stage(cfg, Stage::fit), ValidationError);

  const auto first = run_pipeline(cfg);
  REQUIRE(first.size() == 5);
  for (const auto& r : first) CHECK_FALSE(r.skipped);
  const auto fresh = snapshot(cfg.output_dir);

  const auto again = run_pipeline(cfg);
  for (const auto& r : again) CHECK(r.skipped);
  CHECK(snapshot(cfg.output_dir) == fresh);

  SUBCASE("similarity outputs are valid") {
    for (const auto& name : {"drug_disease_jaccard.tsv", "protein_disease_jaccard.tsv"}) {
      const fs::path p = cfg.output_dir / "similarity" / name;
      const auto ids = load_id_map(cfg.id_maps.at(std::string(name).starts_with("drug") ? EntityKind::drug : EntityKind::protein),
                                   std::string(name).starts_with("drug") ? EntityKind::drug : EntityKind::protein);
      const auto sim = load_similarity(p, ids);
      CHECK(validate_network(sim.network).empty());
    }
  }

  SUBCASE("one embedding per configured network") {
    int files = 0;
    for (const auto& e : fs::directory_iterator(cfg.output_dir / "embed"))
      files += e.path().extension() == ".tsv";
    CHECK(files == 16);
    const auto D = load_stage_features(cfg, EntityKind::drug);
    CHECK(D.values.rows() == 50);
    CHECK(D.values.cols() == 80);
    CHECK(D.provenance.size() == 10);
  }

  SUBCASE("model reload rescoring matches the in-memory fit") {
    const auto mf = read_model(cfg.output_dir / "fit" / "model.json");
    for (double v : mf.model.objective_history) CHECK(std::isfinite(v));
    const auto D = load_stage_features(cfg, EntityKind::drug);
    const auto P = load_stage_features(cfg, EntityKind::protein);
    CompletionConfig cc = cfg.completion;
    cc.seed = Rng::derive(cfg.seed, "fit/init").next_u64();
    Rng rng = Rng::derive(cfg.seed, "fit/negatives");
    const auto pos = load_interactions(cfg);
    const auto mem = train_completion(pos, 50, 40, D.values, P.values, cc, rng);
    const auto a = score_matrix(mem.prepare_drugs(D.values), mem, mem.prepare_proteins(P.values));
    const auto b = score_matrix(mf.model.prepare_drugs(D.values), mf.model, mf.model.prepare_proteins(P.values));
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10);
  }

  SUBCASE("rank outputs") {
    CHECK(count_data_lines(cfg.output_dir / "rank" / "top_associations.tsv") == 100);
    CHECK(count_data_lines(cfg.output_dir / "rank" / "drug_ranking.tsv") == 50);
    CHECK(count_data_lines(cfg.output_dir / "rank" / "scores.tsv") == 50 * 12);
    const auto metrics = json::parse(read_text(cfg.output_dir / "evaluate" / "metrics.json"));
    CHECK(metrics["cv"]["per_fold"].size() == 5);
    CHECK(metrics["external"]["size"] == 8);
    CHECK(read_text(cfg.output_dir / "evaluate" / "cv_roc.csv").starts_with("threshold,x,y\ninf,0,0\n"));
  }

  SUBCASE("a corrupted intermediate forces a rerun with identical results") {
    const fs::path model = cfg.output_dir / "fit" / "model.json";
    write_text(model, read_text(model) + " ");
    CHECK_THROWS_AS(run_stage(cfg, Stage::rank), ValidationError);
    const auto res = run_pipeline(cfg);
    CHECK(res[0].skipped);
    CHECK(res[1].skipped);
    CHECK_FALSE(res[2].skipped);
    CHECK(snapshot(cfg.output_dir) == fresh);
  }

  SUBCASE("resuming after a deleted stage gives the fresh artifacts") {
    fs::remove_all(cfg.output_dir / "evaluate");
    fs::remove_all(cfg.output_dir / "rank");
    run_pipeline(cfg);
    CHECK(snapshot(cfg.output_dir) == fresh);
  }

  SUBCASE("forced reruns are byte-identical, whatever the thread count") {
    RunOptions opts;
    opts.force = true;
    opts.jobs = 3;
    run_pipeline(cfg, opts);
    CHECK(snapshot(cfg.output_dir) == fresh);
  }

  SUBCASE("artifacts from another config are refused") {
    auto other = cfg;
    other.completion.lambda = 1.0;
    CHECK_THROWS_AS(run_stage(other, Stage::rank), ValidationError);
    CHECK_THROWS_AS(run_stage(other, Stage::evaluate), ValidationError);
    CHECK_NOTHROW(run_stage(other, Stage::fit));
    CHECK_NOTHROW(run_stage(other, Stage::rank));
  }

  SUBCASE("a different seed changes the outputs") {
    auto other = cfg;
    other.seed = cfg.seed + 1;
    other.output_dir = tmp / "out2";
    run_pipeline(other);
    CHECK(read_text(other.output_dir / "rank" / "scores.tsv") != fresh.at("rank/scores.tsv"));
  }
}

TEST_CASE("single-protein subset ranks drugs by that protein's column") {
  TempDir tmp;
  const auto cfg_path = small_fixture(tmp.path(), [](json& j) {
    j["ranking"]["top_k"] = 5;
    j["evaluation"].erase("external_set");
  });
  write_text(tmp / "protein_subset.txt", "P007\n");
  const auto cfg = load_pipeline_config(cfg_path);
  run_pipeline(cfg);
  std::istringstream ranking(read_text(cfg.output_dir / "rank" / "drug_ranking.tsv"));
  std::istringstream scores(read_text(cfg.output_dir / "rank" / "scores.tsv"));
  std::string a, b;
  std::getline(ranking, a);
  std::getline(scores, b);
  int rows = 0;
  while (std::getline(ranking, a) && std::getline(scores, b)) {
    CHECK(a.substr(0, a.find('\t')) == b.substr(0, b.find('\t')));
    CHECK(b.find("\tP007\t") != std::string::npos);
    ++rows;
  }
  CHECK(rows == 50);
  CHECK(count_data_lines(cfg.output_dir / "rank" / "top_associations.tsv") == 5);
  const auto metrics = json::parse(read_text(cfg.output_dir / "evaluate" / "metrics.json"));
  CHECK(metrics["external"].is_null());
}

TEST_CASE("an empty protein subset is rejected") {
  TempDir tmp;
  const auto cfg = load_pipeline_config(small_fixture(tmp.path()));
  write_text(tmp / "protein_subset.txt", "\n");
  for (Stage s : {Stage::similarity, Stage::embed, Stage::fit}) run_stage(cfg, s);
  CHECK_THROWS_AS(run_stage(cfg, Stage::rank), ValidationError);
}

TEST_CASE("embedding files round trip") {
  TempDir tmp;
  const EntityIdMap ids(EntityKind::protein, {"P1", "P2", "P3"});
  Embedding e{"net", EntityKind::protein, ids.fingerprint(), Eigen::MatrixXd::Random(3, 4)};
  write_embedding(e, ids, "abc", tmp / "e.tsv");
  const auto back = read_embedding(tmp / "e.tsv", ids);
  CHECK(back.config_hash == "abc");
  CHECK(back.embedding.values == e.values);
  CHECK(back.embedding.network == "net");
  const EntityIdMap other(EntityKind::protein, {"P1", "P3", "P2"});
  CHECK_THROWS_AS(read_embedding(tmp / "e.tsv", other), ValidationError);
}

#ifdef HNDR_CLI
TEST_CASE("command line exit codes and diagnostics") {
  TempDir tmp;
  const auto cfg = small_fixture(tmp.path());

  auto r = run_cli("fit --config " + (tmp / "nope.json").string(), tmp.path());
  CHECK(r.code == 1);
  CHECK(r.err.starts_with("hndr: error code=1 "));
  CHECK(r.err.find("nope.json") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  r = run_cli("bogus", tmp.path());
  CHECK(r.code == 1);

  r = run_cli("fit -q --config " + cfg.string(), tmp.path());
  CHECK(r.code == 1);
  CHECK(r.err.find("stage=fit") != std::string::npos);

  r = run_cli("similarity -q --config " + cfg.string(), tmp.path());
  CHECK(r.code == 0);
  const auto sim = read_text(tmp / "out" / "similarity" / "drug_disease_jaccard.tsv");
  r = run_cli("similarity -q --force --config " + cfg.string(), tmp.path());
  CHECK(r.code == 0);
  CHECK(read_text(tmp / "out" / "similarity" / "drug_disease_jaccard.tsv") == sim);

  // A missing input names the path.
  fs::rename(tmp / "networks" / "drug_sim_3.tsv", tmp / "moved.tsv");
  r = run_cli("embed -q --config " + cfg.string(), tmp.path());
  CHECK(r.code == 1);
  CHECK(r.err.find("drug_sim_3.tsv") != std::string::npos);
  fs::rename(tmp / "moved.tsv", tmp / "networks" / "drug_sim_3.tsv");

  // A learning rate that blows up the autoencoder is a numerical failure.
  json j = json::parse(read_text(cfg));
  j["embedding"]["learning_rate"] = 1e6;
  write_text(tmp / "diverge.json", j.dump());
  r = run_cli("embed -q --config " + (tmp / "diverge.json").string(), tmp.path());
  CHECK(r.code == 2);
  CHECK(r.err.find("code=2") != std::string::npos);
  CHECK(r.err.find("network=") != std::string::npos);

  r = run_cli("pipeline -q --jobs 2 --out " + (tmp / "cli_out").string() + " --config " + cfg.string(), tmp.path());
  CHECK(r.code == 0);
  CHECK(fs::exists(tmp / "cli_out" / "rank" / "top_associations.tsv"));

  r = run_cli("fixture " + (tmp / "fx").string(), tmp.path());
  CHECK(r.code == 0);
  CHECK(fs::exists(tmp / "fx" / "config.json"));
}
#endif

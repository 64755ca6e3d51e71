#include "hndr/fixture.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <string>
#include <vector>

#include "hndr/error.hpp"
#include "hndr/rng.hpp"
#include "hndr/textio.hpp"

namespace hndr {

namespace fs = std::filesystem;
using Eigen::MatrixXd;

namespace {

constexpr int kDrugs = 50;
constexpr int kProteins = 40;
constexpr int kDiseases = 20;
constexpr int kLatent = 3;

std::vector<std::string> make_ids(char prefix, int n) {
  std::vector<std::string> ids;
  for (int i = 1; i <= n; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%c%03d", prefix, i);
    ids.emplace_back(buf);
  }
  return ids;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write: " + p.string());
  return out;
}

void write_ids(const fs::path& p, const std::vector<std::string>& ids) {
  auto out = open_out(p);
  for (const auto& id : ids) out << id << '\n';
}

// Points scattered around a few cluster centers.
MatrixXd latent(int n, int clusters, Rng& rng) {
  MatrixXd centers(clusters, kLatent);
  for (int c = 0; c < clusters; ++c) {
    for (int d = 0; d < kLatent; ++d) centers(c, d) = 1.5 * rng.normal();
  }
  MatrixXd x(n, kLatent);
  for (int i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i % clusters);
    for (int d = 0; d < kLatent; ++d) x(i, d) = centers(c, d) + 0.3 * rng.normal();
  }
  return x;
}

// Binary association: the `density` fraction of highest affinity cells.
std::vector<std::pair<int, int>> top_cells(const MatrixXd& affinity, double density) {
  std::vector<double> v(affinity.data(), affinity.data() + affinity.size());
  const auto keep = static_cast<std::size_t>(std::lround(density * static_cast<double>(v.size())));
  std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() - keep), v.end());
  const double cut = v[v.size() - keep];
  std::vector<std::pair<int, int>> cells;
  for (int i = 0; i < affinity.rows(); ++i) {
    for (int j = 0; j < affinity.cols(); ++j) {
      if (affinity(i, j) >= cut) cells.emplace_back(i, j);
    }
  }
  return cells;
}

void write_pairs(const fs::path& p, const std::vector<std::pair<int, int>>& cells,
                 const std::vector<std::string>& rows, const std::vector<std::string>& cols) {
  auto out = open_out(p);
  out << "# rowID\tcolID\n";
  for (auto [i, j] : cells) out << rows[i] << '\t' << cols[j] << '\n';
}

// Gaussian-kernel similarity on noisy latent positions, thresholded.
void write_similarity(const fs::path& p, const MatrixXd& x, double bandwidth, double noise,
                      double cutoff, const std::vector<std::string>& ids, Rng& rng) {
  MatrixXd y = x;
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] += noise * rng.normal();
  auto out = open_out(p);
  out << "# ID\tID\tsimilarity\n";
  for (int i = 0; i < y.rows(); ++i) {
    out << ids[i] << '\t' << ids[i] << "\t1\n";
    for (int j = i + 1; j < y.rows(); ++j) {
      const double s = std::exp(-(y.row(i) - y.row(j)).squaredNorm() / (2.0 * bandwidth * bandwidth));
      if (s >= cutoff) out << ids[i] << '\t' << ids[j] << '\t' << format_double(s) << '\n';
    }
  }
}

// Symmetric k-nearest-neighbor graph in latent space.
std::vector<std::pair<int, int>> knn_pairs(const MatrixXd& x, int k) {
  std::set<std::pair<int, int>> pairs;
  for (int i = 0; i < x.rows(); ++i) {
    std::vector<std::pair<double, int>> d;
    for (int j = 0; j < x.rows(); ++j) {
      if (j != i) d.emplace_back((x.row(i) - x.row(j)).squaredNorm(), j);
    }
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    for (int t = 0; t < k; ++t) pairs.insert({std::min(i, d[t].second), std::max(i, d[t].second)});
  }
  return {pairs.begin(), pairs.end()};
}

}  // namespace

fs::path write_fixture(const fs::path& dir, const FixtureOptions& opts) {
  fs::create_directories(dir / "ids");
  fs::create_directories(dir / "networks");
  Rng rng = Rng::derive(opts.seed, "fixture");

  const auto drugs = make_ids('D', kDrugs);
  const auto proteins = make_ids('P', kProteins);
  const auto diseases = make_ids('S', kDiseases);
  write_ids(dir / "ids" / "drugs.txt", drugs);
  write_ids(dir / "ids" / "proteins.txt", proteins);
  write_ids(dir / "ids" / "diseases.txt", diseases);

  const MatrixXd U = latent(kDrugs, 5, rng);
  const MatrixXd V = latent(kProteins, 4, rng);
  const MatrixXd S = latent(kDiseases, 4, rng);

  const fs::path nd = dir / "networks";
  auto dti = top_cells(U * V.transpose(), 0.12);
  if (opts.shuffle_labels) {
    Rng shuffle = Rng::derive(opts.seed, "fixture/shuffle");
    std::set<std::pair<int, int>> cells;
    while (cells.size() < dti.size()) {
      cells.insert({static_cast<int>(shuffle.below(kDrugs)), static_cast<int>(shuffle.below(kProteins))});
    }
    dti.assign(cells.begin(), cells.end());
  }
  write_pairs(nd / "drug_protein.tsv", dti, drugs, proteins);
  write_pairs(nd / "drug_disease.tsv", top_cells(U * S.transpose(), 0.2), drugs, diseases);
  write_pairs(nd / "protein_disease.tsv", top_cells(V * S.transpose(), 0.2), proteins, diseases);
  write_pairs(nd / "drug_drug.tsv", knn_pairs(U, 4), drugs, drugs);
  write_pairs(nd / "protein_protein.tsv", knn_pairs(V, 4), proteins, proteins);

  nlohmann::json sims = nlohmann::json::array();
  for (int k = 0; k < 8; ++k) {
    const std::string name = "drug_sim_" + std::to_string(k + 1);
    write_similarity(nd / (name + ".tsv"), U, 1.0 + 0.25 * k, 0.15 + 0.05 * k, 0.2, drugs, rng);
    sims.push_back({{"name", name}, {"kind", "drug"}, {"path", "networks/" + name + ".tsv"}});
  }
  for (int k = 0; k < 4; ++k) {
    const std::string name = "protein_sim_" + std::to_string(k + 1);
    write_similarity(nd / (name + ".tsv"), V, 1.0 + 0.25 * k, 0.15 + 0.05 * k, 0.2, proteins, rng);
    sims.push_back({{"name", name}, {"kind", "protein"}, {"path", "networks/" + name + ".tsv"}});
  }

  // Protein subset: 12 proteins. External set: the 8 drugs with the highest
  // planted affinity to that subset.
  std::vector<int> subset;
  for (int j = 0; j < kProteins; j += 3) subset.push_back(j);
  subset.resize(12);
  {
    auto out = open_out(dir / "protein_subset.txt");
    for (int j : subset) out << proteins[j] << '\n';
  }
  {
    const MatrixXd aff = U * V.transpose();
    std::vector<std::pair<double, int>> best;
    for (int i = 0; i < kDrugs; ++i) {
      double m = -INFINITY;
      for (int j : subset) m = std::max(m, aff(i, j));
      best.emplace_back(-m, i);
    }
    std::sort(best.begin(), best.end());
    auto out = open_out(dir / "external_drugs.txt");
    for (int t = 0; t < 8; ++t) out << drugs[best[t].second] << '\n';
  }

  using nlohmann::json;
  json cfg = {
      {"seed", opts.seed},
      {"output_dir", "out"},
      {"id_maps", {{"drug", "ids/drugs.txt"}, {"protein", "ids/proteins.txt"}, {"disease", "ids/diseases.txt"}}},
      {"networks",
       json::array({
           {{"name", "drug_protein"}, {"rows", "drug"}, {"cols", "protein"}, {"path", "networks/drug_protein.tsv"}},
           {{"name", "drug_disease"}, {"rows", "drug"}, {"cols", "disease"}, {"path", "networks/drug_disease.tsv"}},
           {{"name", "protein_disease"},
            {"rows", "protein"},
            {"cols", "disease"},
            {"path", "networks/protein_disease.tsv"}},
           {{"name", "drug_drug"},
            {"rows", "drug"},
            {"cols", "drug"},
            {"path", "networks/drug_drug.tsv"},
            {"symmetric", true},
            {"embed", true}},
           {{"name", "protein_protein"},
            {"rows", "protein"},
            {"cols", "protein"},
            {"path", "networks/protein_protein.tsv"},
            {"symmetric", true},
            {"embed", true}},
       })},
      {"jaccard",
       json::array({{{"name", "drug_disease_jaccard"}, {"source", "drug_disease"}, {"axis", "rows"}},
                    {{"name", "protein_disease_jaccard"}, {"source", "protein_disease"}, {"axis", "rows"}}})},
      {"similarity_files", sims},
      {"interactions", "drug_protein"},
      {"embedding",
       {{"surf_alpha", 0.98},
        {"surf_steps", 4},
        {"ppmi_shift", 0.0},
        {"hidden", {24, 8}},
        {"noise_rate", 0.2},
        {"lambda", 1e-4},
        {"learning_rate", 0.05},
        {"epochs", 100},
        {"batch_size", 16}}},
      {"completion",
       {{"rank", 8}, {"alpha", 0.1}, {"lambda", 2.0}, {"max_iters", 50}, {"tol", 1e-6}, {"negative_ratio", 1.0}}},
      {"evaluation",
       {{"folds", 5}, {"repeats", opts.repeats}, {"external_set", "external_drugs.txt"}, {"aggregation", "max"}}},
      {"ranking", {{"protein_subset", "protein_subset.txt"}, {"top_k", 100}}},
  };
  const fs::path cfg_path = dir / "config.json";
  auto out = open_out(cfg_path);
  out << cfg.dump(2) << '\n';
  return cfg_path;
}

}  // namespace hndr

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hndr/complete.hpp"
#include "hndr/embed.hpp"
#include "hndr/error.hpp"
#include "hndr/eval.hpp"
#include "hndr/fixture.hpp"
#include "hndr/netio.hpp"
#include "hndr/pipeline.hpp"
#include "hndr/rng.hpp"

namespace py = pybind11;
using namespace hndr;
using Eigen::MatrixXd;

namespace {

// Dense 0/1 or weighted matrix to a network; nonzero entries become edges.
Network network_from_dense(const MatrixXd& m, EntityKind rows, EntityKind cols) {
  std::vector<Edge> edges;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), m(i, j)});
  return make_network("array", rows, cols, static_cast<std::size_t>(m.rows()),
                      static_cast<std::size_t>(m.cols()), std::move(edges), false);
}

std::vector<Cell> cells_from(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs) {
  std::vector<Cell> cells;
  cells.reserve(pairs.size());
  for (const auto& [r, c] : pairs) cells.push_back({r, c});
  return cells;
}

Axis parse_axis(const std::string& s) {
  if (s == "rows") return Axis::rows;
  if (s == "cols") return Axis::cols;
  throw ValidationError("axis must be 'rows' or 'cols', got '" + s + "'");
}

std::vector<std::string> to_strings(const std::vector<StageResult>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(std::string(to_string(r.stage)) + (r.skipped ? ":skipped" : ":ran"));
  return out;
}

}  // namespace

PYBIND11_MODULE(_hndr, m) {
  m.doc() = "Network embedding and inductive matrix completion for drug-target prediction";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "jaccard",
      [](const MatrixXd& assoc, const std::string& axis, double cutoff) {
        return jaccard_similarity(network_from_dense(assoc, EntityKind::drug, EntityKind::disease),
                                  parse_axis(axis), cutoff)
            .network.to_dense();
      },
      py::arg("association"), py::arg("axis") = "rows", py::arg("cutoff") = 0.0,
      "Jaccard similarity between the rows (or columns) of a binary association matrix.");

  m.def("row_normalize", [](const MatrixXd& a) { return MatrixXd(row_normalize(a).matrix); },
        py::arg("adjacency"));
  m.def(
      "random_surf",
      [](const MatrixXd& a, double alpha, int steps) { return random_surf(row_normalize(a), {alpha, steps}); },
      py::arg("adjacency"), py::arg("alpha") = 0.98, py::arg("steps") = 10,
      "Probabilistic co-occurrence matrix of a restart-free random surf.");
  m.def("ppmi", [](const MatrixXd& pco, double shift) { return ppmi(pco, shift).values; }, py::arg("pco"),
        py::arg("shift") = 0.0);

  py::class_<SdaeModel>(m, "SdaeModel")
      .def_readonly("loss_history", &SdaeModel::loss_history)
      .def_property_readonly("input_width", &SdaeModel::input_width)
      .def("encode", [](const SdaeModel& s, const MatrixXd& x) { return sdae_encode(s, x); }, py::arg("x"))
      .def("reconstruct", [](const SdaeModel& s, const MatrixXd& x) { return sdae_reconstruct(s, x); },
           py::arg("x"));

  m.def(
      "sdae_train",
      [](const MatrixXd& x, std::vector<int> hidden, double noise_rate, double lambda, double learning_rate,
         int epochs, int batch_size, std::uint64_t seed) {
        SdaeConfig cfg;
        cfg.layer_sizes = {static_cast<int>(x.cols())};
        cfg.layer_sizes.insert(cfg.layer_sizes.end(), hidden.begin(), hidden.end());
        cfg.noise_rate = noise_rate;
        cfg.lambda = lambda;
        cfg.learning_rate = learning_rate;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        py::gil_scoped_release release;
        return sdae_train(x, cfg);
      },
      py::arg("x"), py::arg("hidden"), py::arg("noise_rate") = 0.2, py::arg("lambda_") = 1e-4,
      py::arg("learning_rate") = 0.05, py::arg("epochs") = 200, py::arg("batch_size") = 32,
      py::arg("seed") = 0, "Trains a stacked denoising autoencoder; `hidden` excludes the input width.");

  py::class_<CompletionModel>(m, "CompletionModel")
      .def_readonly("W", &CompletionModel::W)
      .def_readonly("H", &CompletionModel::H)
      .def_readonly("objective_history", &CompletionModel::objective_history)
      .def(
          "scores",
          [](const CompletionModel& cm, const MatrixXd& drugs, const MatrixXd& proteins) {
            return score_matrix(cm.prepare_drugs(drugs), cm, cm.prepare_proteins(proteins));
          },
          py::arg("drugs"), py::arg("proteins"), "Drug x protein score matrix from raw features.");

  m.def(
      "pumc_fit",
      [](const std::vector<std::pair<std::uint32_t, std::uint32_t>>& positives, const MatrixXd& drugs,
         const MatrixXd& proteins, int rank, double alpha, double lambda, int max_iters, double tol,
         double negative_ratio, bool standardize, std::uint64_t seed) {
        CompletionConfig cfg;
        cfg.rank = rank;
        cfg.alpha = alpha;
        cfg.lambda = lambda;
        cfg.max_iters = max_iters;
        cfg.tol = tol;
        cfg.negative_ratio = negative_ratio;
        cfg.standardize = standardize;
        cfg.seed = seed;
        const auto cells = cells_from(positives);
        py::gil_scoped_release release;
        Rng rng = Rng::derive(seed, "negatives");
        return train_completion(cells, static_cast<std::size_t>(drugs.rows()),
                                static_cast<std::size_t>(proteins.rows()), drugs, proteins, cfg, rng);
      },
      py::arg("positives"), py::arg("drugs"), py::arg("proteins"), py::arg("rank") = 32,
      py::arg("alpha") = 0.1, py::arg("lambda_") = 0.25, py::arg("max_iters") = 100, py::arg("tol") = 1e-6,
      py::arg("negative_ratio") = 1.0, py::arg("standardize") = true, py::arg("seed") = 0,
      "PU-weighted inductive matrix completion from (drug, protein) positive index pairs.");

  m.def("auroc", [](const std::vector<double>& s, const std::vector<int>& y) { return auroc(s, y); },
        py::arg("scores"), py::arg("labels"));
  m.def("aupr", [](const std::vector<double>& s, const std::vector<int>& y) { return aupr(s, y); },
        py::arg("scores"), py::arg("labels"));
  m.def(
      "make_folds",
      [](std::size_t n, int k, int repeats, std::uint64_t seed) { return make_folds(n, k, repeats, seed).assignments; },
      py::arg("n_positives"), py::arg("k") = 5, py::arg("repeats") = 1, py::arg("seed") = 0,
      "Fold index of every positive, one list per repeat.");
  m.def(
      "top_k",
      [](const MatrixXd& block, const std::vector<std::string>& drugs, const std::vector<std::string>& proteins,
         std::size_t k) {
        std::vector<std::tuple<std::string, std::string, double>> out;
        for (auto& a : top_k_associations(block, drugs, proteins, k)) out.emplace_back(a.drug, a.protein, a.score);
        return out;
      },
      py::arg("scores"), py::arg("drug_ids"), py::arg("protein_ids"), py::arg("k"));

  m.def(
      "write_fixture",
      [](const std::filesystem::path& dir, std::uint64_t seed, bool shuffle_labels, int repeats) {
        return write_fixture(dir, {seed, shuffle_labels, repeats});
      },
      py::arg("dir"), py::arg("seed") = 7, py::arg("shuffle_labels") = false, py::arg("repeats") = 2,
      "Writes a small synthetic dataset and its config; returns the config path.");
  m.def(
      "run_pipeline",
      [](const std::filesystem::path& config, int jobs, bool force) {
        const auto cfg = load_pipeline_config(config);
        py::gil_scoped_release release;
        return to_strings(run_pipeline(cfg, {jobs, force, nullptr}));
      },
      py::arg("config"), py::arg("jobs") = 1, py::arg("force") = false,
      "Runs every stage; returns 'stage:ran' or 'stage:skipped' per stage.");
}

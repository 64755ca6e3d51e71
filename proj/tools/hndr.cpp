// Command-line driver for the drug-protein repurposing pipeline.
#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "hndr/error.hpp"
#include "hndr/fixture.hpp"
#include "hndr/pipeline.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kNumerical = 2;

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      default:
        out += c;
    }
  }
  return out + "\"";
}

int fail(int code, std::string_view kind, std::string_view message) {
  std::cerr << "hndr: error code=" << code << " kind=" << kind << " message=" << quote(message) << '\n';
  return code;
}

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool force = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "pipeline config (JSON)")->required();
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--seed", c.seed, "global seed (overrides the config)");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--force", c.force, "rerun stages even if their outputs are current");
  cmd->add_flag("-q,--quiet", c.quiet, "no progress output");
}

hndr::PipelineConfig load(const Common& c) {
  hndr::PipelineConfig cfg = hndr::load_pipeline_config(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hndr: network embedding and PU matrix completion for drug repurposing"};
  app.require_subcommand(1);
  Common common;

  struct Sub {
    const char* name;
    const char* help;
    std::optional<hndr::Stage> stage;
  };
  const Sub subs[] = {
      {"similarity", "Jaccard similarity networks from association files", hndr::Stage::similarity},
      {"embed", "random surf, PPMI and SDAE embedding per network", hndr::Stage::embed},
      {"fit", "fit the completion model on fused features", hndr::Stage::fit},
      {"evaluate", "cross-validation and external validation", hndr::Stage::evaluate},
      {"rank", "score the protein subset and rank drugs", hndr::Stage::rank},
      {"pipeline", "run every stage, skipping those that are current", std::nullopt},
  };
  std::vector<std::pair<CLI::App*, const Sub*>> cmds;
  for (const auto& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, common);
    cmds.emplace_back(cmd, &s);
  }

  std::string fixture_dir;
  hndr::FixtureOptions fixture_opts;
  CLI::App* fixture = app.add_subcommand("fixture", "write the synthetic test universe");
  fixture->add_option("dir", fixture_dir, "target directory")->required();
  fixture->add_option("--seed", fixture_opts.seed, "generator seed");
  fixture->add_option("--repeats", fixture_opts.repeats, "CV repeats written to the config");
  fixture->add_flag("--shuffle-labels", fixture_opts.shuffle_labels, "random drug-protein labels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kValidation, "usage", e.what());
  }

  try {
    if (fixture->parsed()) {
      std::cout << hndr::write_fixture(fixture_dir, fixture_opts).string() << '\n';
      return kOk;
    }
    const hndr::PipelineConfig cfg = load(common);
    hndr::RunOptions opts;
    opts.jobs = common.jobs;
    opts.force = common.force;
    opts.log = common.quiet ? nullptr : &std::cerr;
    for (const auto& [cmd, sub] : cmds) {
      if (!cmd->parsed()) continue;
      if (sub->stage) {
        hndr::run_stage(cfg, *sub->stage, opts);
      } else {
        hndr::run_pipeline(cfg, opts);
      }
    }
    return kOk;
  } catch (const hndr::NumericalError& e) {
    return fail(kNumerical, "numerical", e.what());
  } catch (const hndr::ValidationError& e) {
    return fail(kValidation, "validation", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(kValidation, "validation", e.what());
  }
}

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "sheaf_fmtl/data.hpp"
#include "sheaf_fmtl/experiment.hpp"
#include "sheaf_fmtl/sheaf_io.hpp"
#include "sheaf_fmtl/topology.hpp"

namespace fs = std::filesystem;
using namespace sheaf_fmtl;

namespace {

int cmd_run(const fs::path& config_path, std::optional<std::uint64_t> seed, std::optional<fs::path> output,
            bool quiet) {
  auto config = load_experiment_config(config_path);
  if (seed) config.seed = *seed;
  if (output) config.output_dir = *output;
  const auto result = run_experiment(config);
  write_experiment_outputs(config, result);
  if (!quiet) {
    for (const auto& entry : config.algorithms) {
      double sum = 0.0;
      std::size_t count = 0;
      std::uint64_t bits = 0;
      for (const auto& run : result.runs) {
        if (run.label != entry.label || !run.history.back().test) continue;
        sum += run.history.back().test->mean;
        bits += run.total_bits;
        ++count;
      }
      if (count)
        fmt::print("{:<16} final test metric {:.4f}  bits/run {}\n", entry.label, sum / static_cast<double>(count),
                   bits / count);
    }
    fmt::print("outputs written to {}\n", config.output_dir.string());
  }
  return 0;
}

struct GenDataArgs {
  std::string task = "multinomial";
  std::string heterogeneity = "feature-rotation-groups";
  std::size_t clients = 20;
  std::size_t features = 20;
  std::size_t classes = 4;
  std::size_t samples = 4000;
  std::size_t groups = 4;
  double noise = 1.0;
  double separation = 1.0;
  std::uint64_t seed = 0;
  fs::path out = "data";
};

int cmd_gen_data(const GenDataArgs& args) {
  SynthSpec spec;
  spec.task = parse_task_kind(args.task);
  spec.clients = args.clients;
  spec.features = args.features;
  spec.classes = args.classes;
  spec.samples = args.samples;
  spec.noise = args.noise;
  spec.class_separation = args.separation;
  spec.heterogeneity.kind = parse_heterogeneity_kind(args.heterogeneity);
  spec.heterogeneity.groups = args.groups;
  spec.heterogeneity.seed = args.seed;
  const auto fed = synth_federation(spec);
  fs::create_directories(args.out);
  for (std::size_t i = 0; i < fed.size(); ++i) {
    const auto path = args.out / fmt::format("client_{:03}.csv", i);
    write_client_csv(path, fed.clients[i]);
  }
  fmt::print("wrote {} client files to {}\n", fed.size(), args.out.string());
  return 0;
}

struct InspectArgs {
  std::optional<fs::path> sheaf_file;
  std::optional<fs::path> edge_list;
  std::string topology = "erdos-renyi";
  std::size_t n = 6;
  double p = 0.5;
  std::size_t dim = 4;
  double gamma = 0.5;
  std::string init = "gaussian";
  double scale = 1.0;
  std::uint64_t seed = 0;
  std::optional<fs::path> save;
};

int cmd_inspect(const InspectArgs& args) {
  std::optional<SheafDocument> doc;
  if (args.sheaf_file) {
    doc = load_sheaf(*args.sheaf_file);
  } else {
    Graph graph = [&] {
      if (args.edge_list) return load_edge_list(*args.edge_list);
      TopologySpec spec;
      spec.kind = parse_topology_kind(args.topology);
      spec.n = args.n;
      spec.edge_probability = args.p;
      spec.seed = args.seed;
      return gen_topology(spec).graph;
    }();
    auto sheaf = SheafGraph::with_gamma(std::move(graph), std::vector<std::size_t>(args.n, args.dim), args.gamma);
    InitSpec init{parse_init_kind(args.init), args.scale, args.seed};
    auto maps = init_maps(init, sheaf);
    doc = SheafDocument{std::move(sheaf), std::move(maps)};
  }
  const auto& sheaf = doc->sheaf;
  fmt::print("vertices {}  edges {}  total stalk dim {}  total edge dim {}\n", sheaf.n_vertices(), sheaf.n_edges(),
             sheaf.total_stalk_dim(), sheaf.total_edge_dim());
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    const auto& edge = sheaf.graph().edge(e);
    fmt::print("  edge {}-{}  d_ij {}", edge.lo, edge.hi, sheaf.edge_dim(e));
    if (doc->maps)
      fmt::print("  |P_lo|_F {:.6g}  |P_hi|_F {:.6g}", doc->maps->lower(e).norm(), doc->maps->upper(e).norm());
    fmt::print("\n");
  }
  if (doc->maps) {
    if (sheaf.total_stalk_dim() <= 2048) {
      Eigen::SelfAdjointEigenSolver<Matrix> solver(laplacian_matrix(sheaf, *doc->maps), Eigen::EigenvaluesOnly);
      const auto& ev = solver.eigenvalues();
      std::size_t kernel = 0;
      const double tol = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
      for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (std::abs(ev[i]) <= tol) ++kernel;
      fmt::print("laplacian spectrum: min {:.6g}  max {:.6g}  kernel dim {}\n", ev.minCoeff(), ev.maxCoeff(), kernel);
    } else {
      fmt::print("laplacian spectrum skipped: total dimension {} too large\n", sheaf.total_stalk_dim());
    }
  }
  if (args.save) {
    save_sheaf(*args.save, sheaf, doc->maps ? &*doc->maps : nullptr);
    fmt::print("saved {}\n", args.save->string());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sheaf-regularised decentralised multi-task learning simulator"};
  app.require_subcommand(1);

  fs::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> output;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  run->add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-s,--seed", seed, "Override the global seed");
  run->add_option("-o,--output", output, "Override the output directory");
  run->add_flag("-q,--quiet", quiet, "Suppress the summary printout");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic federation as one CSV per client");
  gen_cmd->add_option("--task", gen.task, "multinomial or regression")->capture_default_str();
  gen_cmd->add_option("--heterogeneity", gen.heterogeneity, "Heterogeneity kind")->capture_default_str();
  gen_cmd->add_option("--clients", gen.clients)->capture_default_str();
  gen_cmd->add_option("--features", gen.features)->capture_default_str();
  gen_cmd->add_option("--classes", gen.classes)->capture_default_str();
  gen_cmd->add_option("--samples", gen.samples, "Total samples across clients")->capture_default_str();
  gen_cmd->add_option("--groups", gen.groups)->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise)->capture_default_str();
  gen_cmd->add_option("--separation", gen.separation)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("-o,--output", gen.out, "Output directory")->capture_default_str();

  InspectArgs ins;
  auto* ins_cmd = app.add_subcommand("inspect-sheaf", "Print dimensions, map norms and Laplacian spectrum of a sheaf");
  ins_cmd->add_option("--sheaf", ins.sheaf_file, "Sheaf JSON document to load")->check(CLI::ExistingFile);
  ins_cmd->add_option("--edges", ins.edge_list, "Edge-list file to build a sheaf on")->check(CLI::ExistingFile);
  ins_cmd->add_option("--topology", ins.topology)->capture_default_str();
  ins_cmd->add_option("--n", ins.n)->capture_default_str();
  ins_cmd->add_option("--p", ins.p, "Erdos-Renyi edge probability")->capture_default_str();
  ins_cmd->add_option("--dim", ins.dim, "Stalk dimension of every vertex")->capture_default_str();
  ins_cmd->add_option("--gamma", ins.gamma)->capture_default_str();
  ins_cmd->add_option("--init", ins.init)->capture_default_str();
  ins_cmd->add_option("--scale", ins.scale)->capture_default_str();
  ins_cmd->add_option("--seed", ins.seed)->capture_default_str();
  ins_cmd->add_option("--save", ins.save, "Write the sheaf (with maps) as JSON");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, seed, output, quiet);
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*ins_cmd) return cmd_inspect(ins);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}

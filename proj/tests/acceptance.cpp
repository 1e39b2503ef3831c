// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "sheaf_fmtl/comm.hpp"
#include "sheaf_fmtl/data.hpp"
#include "sheaf_fmtl/engine.hpp"
#include "sheaf_fmtl/experiment.hpp"
#include "sheaf_fmtl/sheaf.hpp"
#include "sheaf_fmtl/topology.hpp"
#include "sheaf_fmtl/trainer.hpp"
#include "support.hpp"

using namespace sheaf_fmtl;
using namespace sheaf_fmtl::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Outcome verdict(bool pass, std::string detail) { return {pass, std::move(detail)}; }

// Sum of squared edge discrepancies written out from the maps.
double edge_discrepancy_sum(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta) {
  double total = 0.0;
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    const auto& edge = maps.edge(e);
    total += (maps.upper(e) * theta[edge.hi] - maps.lower(e) * theta[edge.lo]).squaredNorm();
  }
  return total;
}

Outcome quadratic_form_equivalence() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto sheaf = random_sheaf(rng, 8, 5, 4);
    const auto maps = random_maps(sheaf, rng);
    const auto theta = random_section(sheaf.stalk_dims(), rng);
    const double direct = edge_discrepancy_sum(sheaf, maps, theta);
    const Vector x = theta.flatten();
    const double dense = x.dot(laplacian_matrix(sheaf, maps) * x);
    const double library = quadratic_form(sheaf, maps, theta);
    const double scale = std::max({std::abs(direct), std::abs(dense), 1e-300});
    worst = std::max({worst, std::abs(direct - dense) / scale, std::abs(direct - library) / scale});
  }
  const double elapsed = seconds_since(start);
  return verdict(worst <= 1e-9 && elapsed < 1.0,
                 fmt::format("200 instances, max relative error {:.2e}, {:.3f} s", worst, elapsed));
}

Outcome kernel_global_sections() {
  const auto start = Clock::now();
  std::mt19937_64 rng(202);
  std::size_t vectors = 0;
  bool ok = true;
  double worst_ratio = 0.0;
  for (int t = 0; t < 60; ++t) {
    const auto sheaf = random_sheaf(rng, 7, 5, 2);
    const auto maps = random_maps(sheaf, rng);
    const Matrix kernel = null_space(laplacian_matrix(sheaf, maps));
    const double d = static_cast<double>(sheaf.total_stalk_dim());
    for (Eigen::Index c = 0; c < kernel.cols(); ++c) {
      const Vector v = kernel.col(c).normalized();
      const auto theta = Section::from_flat(sheaf.stalk_dims(), v);
      const double q = quadratic_form(sheaf, maps, theta);
      worst_ratio = std::max(worst_ratio, q / d);
      ok = ok && is_global_section(sheaf, maps, theta, 1e-8) && q <= 1e-16 * d;
      ++vectors;
    }
  }

  // Constant sheaves: identical models agree exactly on every edge.
  bool consensus_exact = true;
  for (int t = 0; t < 50; ++t) {
    const auto n = uniform_size(rng, 2, 8);
    const auto d = uniform_size(rng, 1, 6);
    auto sheaf = SheafGraph::with_gamma(random_connected_graph(n, 0.4, rng), std::vector<std::size_t>(n, d), 1.0);
    const auto maps = identity_maps(sheaf);
    const Vector common = random_matrix(static_cast<Eigen::Index>(d), 1, rng).col(0);
    Section theta(std::vector<Vector>(n, common));
    const auto delta = coboundary_apply(sheaf, maps, theta);
    for (std::size_t e = 0; e < sheaf.n_edges(); ++e) consensus_exact = consensus_exact && (delta[e].array() == 0.0).all();
    consensus_exact = consensus_exact && quadratic_form(sheaf, maps, theta) == 0.0 &&
                      is_global_section(sheaf, maps, theta, std::numeric_limits<double>::min());
  }
  const double elapsed = seconds_since(start);
  return verdict(ok && vectors >= 20 && consensus_exact && elapsed < 1.0,
                 fmt::format("{} kernel vectors, max Q/d {:.2e}, consensus exact: {}, {:.3f} s", vectors,
                             worst_ratio, consensus_exact ? "yes" : "no", elapsed));
}

Outcome factorization_psd() {
  std::mt19937_64 rng(303);
  double worst_fact = 0.0;
  double min_eig = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 50; ++t) {
    const auto sheaf = random_sheaf(rng, 8, 5, 4);
    const auto maps = random_maps(sheaf, rng);
    const Matrix delta = coboundary_matrix(sheaf, maps);
    const Matrix lap = laplacian_matrix(sheaf, maps);
    const double scale = std::max(1.0, lap.cwiseAbs().maxCoeff());
    worst_fact = std::max(worst_fact, (lap - delta.transpose() * delta).cwiseAbs().maxCoeff() / scale);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(lap);
    min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
  }
  return verdict(worst_fact <= 1e-10 && min_eig >= -1e-10,
                 fmt::format("50 instances, max |L - d^T d| {:.2e}, min eigenvalue {:.2e}", worst_fact, min_eig));
}

Outcome gradient_finite_differences() {
  const auto start = Clock::now();
  std::mt19937_64 rng(404);
  double worst_theta = 0.0;
  double worst_p = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto sheaf = random_sheaf(rng, 6, 6, 3);
    const auto fed = mixed_federation(sheaf, rng);
    const auto maps = random_maps(sheaf, rng, 0.5);
    const auto theta = random_section(sheaf.stalk_dims(), rng, 0.5);
    const double lambda = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    const auto& dims = sheaf.stalk_dims();

    const auto f_theta = [&](const Vector& x) {
      return objective_psi(sheaf, fed, Section::from_flat(dims, x), maps, lambda);
    };
    const Vector g_theta = grad_theta_psi(sheaf, fed, theta, maps, lambda).flatten();
    worst_theta = std::max(worst_theta, relative_error(g_theta, fd_gradient(f_theta, theta.flatten())));

    const auto f_p = [&](const Vector& x) {
      return objective_psi(sheaf, fed, theta, unflatten_maps(maps, x), lambda);
    };
    const Vector g_p = flatten_maps(grad_p_psi(sheaf, theta, maps, lambda));
    worst_p = std::max(worst_p, relative_error(g_p, fd_gradient(f_p, flatten_maps(maps))));
  }
  const double elapsed = seconds_since(start);
  return verdict(worst_theta <= 1e-5 && worst_p <= 1e-5 && elapsed < 5.0,
                 fmt::format("50 points, max relative error theta {:.2e}, P {:.2e}, {:.3f} s", worst_theta,
                             worst_p, elapsed));
}

Outcome matrix_form_equivalence() {
  std::mt19937_64 rng(505);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const auto sheaf = random_sheaf(rng, 8, 5, 3);
    const auto fed = mixed_federation(sheaf, rng);
    const StepParams params{0.02, 0.02, 0.5};
    auto theta_a = random_section(sheaf.stalk_dims(), rng, 0.5);
    auto maps_a = random_maps(sheaf, rng, 0.5);
    auto theta_b = theta_a;
    auto maps_b = maps_a;
    for (int k = 0; k < 20; ++k) {
      MessageBoard board(sheaf.graph());
      post_projections(sheaf, maps_a, theta_a, board);
      auto theta_next = theta_step(sheaf, fed, theta_a, maps_a, board, params);
      board.clear();
      post_projections(sheaf, maps_a, theta_next, board);
      maps_a = p_step(sheaf, theta_next, maps_a, board, params);
      theta_a = std::move(theta_next);

      std::tie(theta_b, maps_b) = matrix_form_step(sheaf, fed, theta_b, maps_b, params);
      worst = std::max({worst, max_abs_diff(theta_a, theta_b), max_abs_diff(maps_a, maps_b)});
    }
  }
  return verdict(worst <= 1e-10, fmt::format("10 instances x 20 rounds, max elementwise gap {:.2e}", worst));
}

// Runs with eta = 0.5 * 2 / (lambda D^2), where D is the largest ||theta|| seen in
// a pilot run. Repeats until the trajectory stays within the D it was tuned for.
struct TunedRun {
  TrainingResult result;
  double alpha = 0.0;
  double eta = 0.0;
  double smoothness = 0.0;
  double domain = 0.0;
};

TunedRun run_with_valid_steps(const TrainingInputs& inputs, TrainerConfig config) {
  const auto n = inputs.sheaf->n_vertices();
  const double smoothness = smoothness_bound(*inputs.train);
  config.smoothness = smoothness;
  config.alpha = 0.5 * 2.0 / (static_cast<double>(n) * smoothness);
  config.eta = 0.0;
  auto pilot = run_training(inputs, config);
  double domain = pilot.hindsight.domain_bound;
  for (int attempt = 0; attempt < 8; ++attempt) {
    config.eta = 0.5 * 2.0 / (config.lambda * domain * domain);
    auto result = run_training(inputs, config);
    if (result.hindsight.domain_bound <= domain) return {std::move(result), config.alpha, config.eta, smoothness, domain};
    domain = result.hindsight.domain_bound;
  }
  throw std::runtime_error("step-size tuning did not settle");
}

Outcome descent_guarantee() {
  const auto start = Clock::now();
  SynthSpec spec;
  spec.task = TaskKind::Regression;
  spec.clients = 10;
  spec.features = 10;
  spec.samples = 600;
  spec.heterogeneity.kind = HeterogeneityKind::ConceptShift;
  spec.heterogeneity.groups = 2;
  spec.heterogeneity.seed = 17;
  const auto fed = synth_federation(spec);

  TopologySpec topo;
  topo.kind = TopologyKind::ErdosRenyi;
  topo.n = 10;
  topo.edge_probability = 0.4;
  topo.seed = 17;
  const auto sheaf = SheafGraph::with_gamma(gen_topology(topo).graph, fed.model_dims(), 0.5);

  TrainerConfig config;
  config.algorithm = Algorithm::SheafFmtl;
  config.lambda = 0.1;
  config.rounds = 200;
  config.init = {InitKind::Gaussian, 0.3, 17};
  config.monitor_descent = true;
  TrainingInputs inputs;
  inputs.sheaf = &sheaf;
  inputs.train = &fed;
  const auto tuned = run_with_valid_steps(inputs, config);
  const auto& result = tuned.result;

  const double n = static_cast<double>(sheaf.n_vertices());
  const double theta_coef = tuned.alpha * (1.0 - tuned.alpha * n * tuned.smoothness / 2.0);
  const double p_coef = tuned.eta * (1.0 - tuned.eta * config.lambda * tuned.domain * tuned.domain / 2.0);
  std::size_t held = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (const auto& c : result.descent) {
    const double tol = 1e-9 * std::max(1.0, std::abs(c.psi_before));
    const double s_theta = (c.psi_before - theta_coef * c.grad_theta_sq) - c.psi_half;
    const double s_p = (c.psi_half - p_coef * c.grad_p_half_sq) - c.psi_after;
    min_slack = std::min({min_slack, s_theta, s_p, c.theta_slack, c.p_slack});
    if (s_theta >= -tol && s_p >= -tol && c.theta_slack >= -tol && c.p_slack >= -tol) ++held;
  }

  const auto bounds = step_bounds(sheaf.n_vertices(), tuned.smoothness, config.lambda, tuned.domain);
  const double rho = bounds.rho(tuned.alpha, tuned.eta);
  double min_grad = std::numeric_limits<double>::infinity();
  double psi_best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < result.history.size(); ++k) {
    if (k < config.rounds) min_grad = std::min(min_grad, result.history[k].grad_theta_sq + result.history[k].grad_p_sq);
    psi_best = std::min(psi_best, result.history[k].psi);
  }
  const double rate = (result.history.front().psi - psi_best) / (rho * static_cast<double>(config.rounds));
  const double elapsed = seconds_since(start);
  const bool pass = result.descent.size() == 200 && held == 200 && min_grad <= rate && result.hindsight.rate_ok &&
                    bounds.admissible(tuned.alpha, tuned.eta) && elapsed < 10.0;
  return verdict(pass, fmt::format("{}/200 rounds held (min slack {:.2e}), min grad^2 {:.3e} <= bound {:.3e}, {:.2f} s",
                                   held, min_slack, min_grad, rate, elapsed));
}

Outcome special_cases() {
  std::mt19937_64 rng(606);
  std::vector<std::string> notes;
  bool all = true;

  const auto n = 6;
  const auto graph = random_connected_graph(n, 0.5, rng);
  const auto sheaf = SheafGraph::with_gamma(graph, std::vector<std::size_t>(n, 4), 1.0);
  const auto fed = regression_federation(sheaf, rng);
  const auto start_theta = random_section(sheaf.stalk_dims(), rng);
  const double alpha = 0.02;
  const double lambda = 0.7;

  // (a) frozen identity maps against dfedu and a hand-written consensus step.
  {
    const auto ident = identity_maps(sheaf);
    double worst = 0.0;
    Section oracle = start_theta;
    for (std::size_t k = 1; k <= 25; ++k) {
      Section next = oracle;
      for (std::size_t i = 0; i < n; ++i) {
        Vector pull = Vector::Zero(4);
        for (const auto& inc : graph.incidences(i)) pull += oracle[i] - oracle[inc.neighbor];
        next[i] = oracle[i] - alpha * (loss_grad(fed.clients[i], oracle[i]) + lambda * pull);
      }
      oracle = std::move(next);

      TrainingInputs in;
      in.sheaf = &sheaf;
      in.train = &fed;
      in.initial_theta = &start_theta;
      in.initial_maps = &ident;
      TrainerConfig cfg;
      cfg.rounds = k;
      cfg.alpha = alpha;
      cfg.lambda = lambda;
      cfg.monitor_descent = false;
      cfg.eta = 0.0;
      cfg.freeze_maps = true;
      const auto frozen = run_training(in, cfg);
      cfg.algorithm = Algorithm::DFedU;
      cfg.freeze_maps = false;
      const auto dfedu = run_training(in, cfg);
      worst = std::max({worst, max_abs_diff(frozen.theta, dfedu.theta), max_abs_diff(frozen.theta, oracle)});
    }
    const bool ok = worst <= 1e-12;
    all = all && ok;
    notes.push_back(fmt::format("a {:.1e}", worst));
  }

  const auto independent_gd = [&](std::size_t rounds) {
    Section theta = start_theta;
    for (std::size_t k = 0; k < rounds; ++k)
      for (std::size_t i = 0; i < n; ++i) theta[i] = theta[i] - alpha * loss_grad(fed.clients[i], theta[i]);
    return theta;
  };
  const auto exact = [](const Section& a, const Section& b) { return (a.flatten().array() == b.flatten().array()).all(); };

  // (b) lambda = 0 with random maps.
  {
    TrainingInputs in;
    in.sheaf = &sheaf;
    in.train = &fed;
    in.initial_theta = &start_theta;
    TrainerConfig cfg;
    cfg.rounds = 40;
    cfg.alpha = alpha;
    cfg.lambda = 0.0;
    cfg.eta = 0.1;
    cfg.monitor_descent = false;
    cfg.init = {InitKind::Gaussian, 1.0, 5};
    const bool ok = exact(run_training(in, cfg).theta, independent_gd(40));
    all = all && ok;
    notes.push_back(fmt::format("b {}", ok ? "exact" : "differs"));
  }

  // (c) all-zero maps stay zero and reduce to local training.
  {
    TrainingInputs in;
    in.sheaf = &sheaf;
    in.train = &fed;
    in.initial_theta = &start_theta;
    TrainerConfig cfg;
    cfg.rounds = 40;
    cfg.alpha = alpha;
    cfg.lambda = 3.0;
    cfg.eta = 0.1;
    cfg.monitor_descent = false;
    cfg.init.kind = InitKind::Zero;
    cfg.allow_zero_init = true;
    const auto zero = run_training(in, cfg);
    cfg.algorithm = Algorithm::Local;
    cfg.allow_zero_init = false;
    const auto local = run_training(in, cfg);
    const bool ok = exact(zero.theta, independent_gd(40)) && exact(local.theta, zero.theta);
    all = all && ok;
    notes.push_back(fmt::format("c {}", ok ? "exact" : "differs"));
  }

  // (d) personalized FL: server vertex 0 holds the shared model.
  {
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const auto clients = uniform_size(rng, 2, 8);
      const auto d = uniform_size(rng, 1, 6);
      const std::vector<std::size_t> dims(clients, d);
      SpecialCase sc;
      sc.kind = SpecialCaseKind::PersonalizedFl;
      const auto sp = special_case_sheaf(sc, random_connected_graph(clients, 0.5, rng), dims);
      const auto theta = random_section(sp.sheaf.stalk_dims(), rng);
      double expected = 0.0;
      for (std::size_t v = 0; v < sp.sheaf.n_vertices(); ++v)
        if (v != sp.server) expected += (theta[sp.server] - theta[v]).squaredNorm();
      worst = std::max(worst, std::abs(quadratic_form(sp.sheaf, sp.maps, theta) - expected));
    }
    const bool ok = worst <= 1e-10;
    all = all && ok;
    notes.push_back(fmt::format("d {:.1e}", worst));
  }

  // (e) hybrid FL: client i keeps a coordinate subset of the server model.
  {
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const auto clients = uniform_size(rng, 2, 8);
      const std::size_t q = 8;
      SpecialCase sc;
      sc.kind = SpecialCaseKind::HybridFl;
      sc.server_dim = q;
      std::vector<std::size_t> dims;
      for (std::size_t i = 0; i < clients; ++i) {
        std::vector<std::size_t> coords(q);
        std::iota(coords.begin(), coords.end(), 0);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(uniform_size(rng, 1, q));
        dims.push_back(coords.size());
        sc.selections.push_back(coords);
      }
      const auto sp = special_case_sheaf(sc, random_connected_graph(clients, 0.5, rng), dims);
      const auto theta = random_section(sp.sheaf.stalk_dims(), rng);
      double expected = 0.0;
      for (std::size_t i = 0; i < clients; ++i) {
        Vector picked(static_cast<Eigen::Index>(dims[i]));
        for (std::size_t r = 0; r < dims[i]; ++r)
          picked[static_cast<Eigen::Index>(r)] = theta[sp.server][static_cast<Eigen::Index>(sc.selections[i][r])];
        expected += (theta[i + 1] - picked).squaredNorm();
      }
      worst = std::max(worst, std::abs(quadratic_form(sp.sheaf, sp.maps, theta) - expected));
    }
    const bool ok = worst <= 1e-10;
    all = all && ok;
    notes.push_back(fmt::format("e {:.1e}", worst));
  }

  std::string joined;
  for (const auto& note : notes) joined += (joined.empty() ? "" : ", ") + note;
  return verdict(all, joined);
}

Outcome communication_scaling() {
  TopologySpec topo;
  topo.kind = TopologyKind::ErdosRenyi;
  topo.n = 8;
  topo.edge_probability = 0.5;
  topo.seed = 8;
  const auto graph = gen_topology(topo).graph;
  const auto sheaf = SheafGraph::with_gamma(graph, std::vector<std::size_t>(8, 100), 0.01);

  const auto sheaf_payload = scalars_per_round(sheaf, Algorithm::SheafFmtl);
  const auto dfedu_payload = scalars_per_round(sheaf, Algorithm::DFedU);
  bool ratio_exact = true;
  for (std::size_t i = 0; i < 8; ++i) {
    ratio_exact = ratio_exact && sheaf_payload.table3[i] == graph.degree(i) &&
                  dfedu_payload.table3[i] == 100 * graph.degree(i) &&
                  100 * sheaf_payload.table3[i] == dfedu_payload.table3[i];
  }

  std::mt19937_64 rng(808);
  const auto fed = regression_federation(sheaf, rng, 20);
  const std::size_t rounds = 50;
  const unsigned bits = 32;
  bool ledger_exact = true;
  std::uint64_t sheaf_bits = 0;
  std::uint64_t dfedu_bits = 0;
  for (auto alg : {Algorithm::SheafFmtl, Algorithm::DFedU}) {
    TrainerConfig cfg;
    cfg.algorithm = alg;
    cfg.rounds = rounds;
    cfg.alpha = 1e-3;
    cfg.eta = 1e-4;
    cfg.scalar_bits = bits;
    cfg.convention = BitsConvention::Table3;
    cfg.monitor_descent = false;
    const auto result = run_training(sheaf, fed, cfg);
    const std::uint64_t per_edge = alg == Algorithm::SheafFmtl ? 1 : 100;
    const std::uint64_t formula = rounds * 2 * graph.n_edges() * per_edge * bits;
    const auto observed = result.history.back().cumulative_bits;
    ledger_exact = ledger_exact && observed == formula && result.ledger.total_bits(rounds, BitsConvention::Table3) == formula;
    (alg == Algorithm::SheafFmtl ? sheaf_bits : dfedu_bits) = observed;
  }
  return verdict(ratio_exact && ledger_exact && 100 * sheaf_bits == dfedu_bits,
                 fmt::format("per-client ratio exactly 1/100: {}, K=50 bits sheaf {} vs dfedu {}, ledger = formula: {}",
                             ratio_exact ? "yes" : "no", sheaf_bits, dfedu_bits, ledger_exact ? "yes" : "no"));
}

const AlgorithmRun& entry_for(const ExperimentConfig& cfg, Algorithm alg) {
  for (const auto& run : cfg.algorithms)
    if (run.trainer.algorithm == alg) return run;
  throw std::runtime_error(fmt::format("config has no {} entry", to_string(alg)));
}

double final_test(const RunSeries& series) {
  return series.history.back().test ? series.history.back().test->mean : std::numeric_limits<double>::quiet_NaN();
}

Outcome collaboration_gain() {
  const auto start = Clock::now();
  const auto cfg = load_experiment_config(fs::path(SHEAF_FMTL_CONFIG_DIR) / "collaboration.json");
  const auto& sheaf_entry = entry_for(cfg, Algorithm::SheafFmtl);
  const auto& local_entry = entry_for(cfg, Algorithm::Local);

  // lambda is picked on seeds disjoint from the evaluation seeds.
  auto tuning = cfg;
  tuning.seed = 1001;
  const std::size_t tuning_repeats = 2;
  std::vector<RepeatSetup> tuning_setups;
  for (std::size_t r = 0; r < tuning_repeats; ++r) tuning_setups.push_back(prepare_repeat(tuning, r));
  double best_lambda = 0.0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (double lambda : {0.5, 2.0, 5.0}) {
    auto run = sheaf_entry;
    run.trainer.lambda = lambda;
    double score = 0.0;
    try {
      for (std::size_t r = 0; r < tuning_repeats; ++r) score += final_test(run_algorithm(tuning, tuning_setups[r], run, r));
    } catch (const std::runtime_error&) {
      continue;
    }
    if (score > best_score) {
      best_score = score;
      best_lambda = lambda;
    }
  }

  auto chosen = sheaf_entry;
  chosen.trainer.lambda = best_lambda;
  double sheaf_acc = 0.0;
  double local_acc = 0.0;
  const std::size_t repeats = 5;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto setup = prepare_repeat(cfg, r);
    sheaf_acc += final_test(run_algorithm(cfg, setup, chosen, r)) / repeats;
    local_acc += final_test(run_algorithm(cfg, setup, local_entry, r)) / repeats;
  }
  const double elapsed = seconds_since(start);
  const double gain = 100.0 * (sheaf_acc - local_acc);
  return verdict(gain >= 3.0 && elapsed < 120.0,
                 fmt::format("lambda {} -> sheaf-fmtl {:.4f} vs local {:.4f} ({:+.2f} pp over 5 seeds), {:.1f} s",
                             best_lambda, sheaf_acc, local_acc, gain, elapsed));
}

Outcome heterogeneous_dims() {
  const auto cfg = load_experiment_config(fs::path(SHEAF_FMTL_CONFIG_DIR) / "heterogeneous.json");
  const auto& sheaf_entry = entry_for(cfg, Algorithm::SheafFmtl);
  double sheaf_acc = 0.0;
  double local_acc = 0.0;
  bool dims_ok = true;
  bool monotone = true;
  std::set<std::size_t> seen;
  const std::size_t repeats = 5;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto setup = prepare_repeat(cfg, r);
    const auto sheaf = SheafGraph::with_gamma(setup.topology.graph, setup.stalk_dims, cfg.gamma);
    for (auto d : sheaf.stalk_dims()) seen.insert(d);
    for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
      const auto& edge = sheaf.graph().edges()[e];
      const auto lo = std::min(sheaf.stalk_dim(edge.lo), sheaf.stalk_dim(edge.hi));
      const auto expected = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.gamma * lo + 1e-9)));
      dims_ok = dims_ok && sheaf.edge_dim(e) == expected;
    }

    TrainingInputs inputs;
    inputs.sheaf = &sheaf;
    inputs.train = &setup.split.train;
    inputs.test = &setup.split.test;
    auto trainer = sheaf_entry.trainer;
    trainer.init.seed = derive_seeds(cfg.seed, r).init;
    trainer.monitor_descent = false;
    const auto tuned = run_with_valid_steps(inputs, trainer);
    const auto& hist = tuned.result.history;
    for (std::size_t k = 1; k < hist.size(); ++k)
      monotone = monotone && hist[k].psi <= hist[k - 1].psi + 1e-12 * std::abs(hist[k - 1].psi);
    sheaf_acc += hist.back().test->mean / repeats;

    auto local = trainer;
    local.algorithm = Algorithm::Local;
    local.alpha = tuned.alpha;
    local.smoothness = tuned.smoothness;
    local_acc += run_training(inputs, local).history.back().test->mean / repeats;
  }
  const bool dims_cover = seen == std::set<std::size_t>{20, 30, 40};
  return verdict(dims_ok && dims_cover && monotone && sheaf_acc >= local_acc,
                 fmt::format("d_i in {{20,30,40}}: {}, edge dims match: {}, psi non-increasing: {}, "
                             "sheaf-fmtl {:.4f} vs local {:.4f} over 5 seeds",
                             dims_cover ? "yes" : "no", dims_ok ? "yes" : "no", monotone ? "yes" : "no", sheaf_acc,
                             local_acc));
}

int run_cli(const std::string& config, const fs::path& out) {
  if (std::string(SHEAF_FMTL_CLI).empty()) throw std::runtime_error("the CLI was not built");
  fs::remove_all(out);
  const std::string cmd = fmt::format("\"{}\" run -c \"{}\" -o \"{}\" -q", SHEAF_FMTL_CLI, config, out.string());
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, ',')) out.push_back(cell);
  return out;
}

Outcome topology_ablation() {
  const auto start = Clock::now();
  const fs::path out = fs::path(SHEAF_FMTL_ACCEPTANCE_OUT) / "ablation";
  const std::string config = (fs::path(SHEAF_FMTL_CONFIG_DIR) / "ablation.json").string();
  if (run_cli(config, out) != 0) return verdict(false, "CLI run failed");

  std::istringstream csv(slurp(out / "ablation.csv"));
  std::string line;
  std::getline(csv, line);
  if (line != "topology,lambda,algorithm,test_mean,test_stderr,total_bits,diverged")
    return verdict(false, "unexpected ablation.csv header: " + line);

  struct Cell {
    double acc = 0.0;
    std::uint64_t bits = 0;
  };
  std::map<std::tuple<std::string, double, std::string>, Cell> grid;
  std::size_t diverged = 0;
  while (std::getline(csv, line)) {
    const auto f = split_csv_line(line);
    if (f.size() != 7) return verdict(false, "malformed row: " + line);
    grid[{f[0], std::stod(f[1]), f[2]}] = {std::stod(f[3]), std::stoull(f[5])};
    diverged += std::stoul(f[6]);
  }

  const std::vector<std::string> topologies{"small-world", "scale-free", "complete"};
  const std::vector<double> lambdas{1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0};
  bool complete_grid = grid.size() == topologies.size() * lambdas.size() * 2;
  bool bits_ok = true;
  double acc_high = 0.0;
  double acc_low = 0.0;
  for (const auto& t : topologies)
    for (double l : lambdas) {
      const auto s = grid.find({t, l, "sheaf-fmtl"});
      const auto d = grid.find({t, l, "dfedu"});
      if (s == grid.end() || d == grid.end()) {
        complete_grid = false;
        continue;
      }
      bits_ok = bits_ok && s->second.bits < d->second.bits;
      if (l == 10.0) acc_high += (s->second.acc + d->second.acc) / 6.0;
      if (l == 1e-3) acc_low += (s->second.acc + d->second.acc) / 6.0;
    }
  const double elapsed = seconds_since(start);
  return verdict(complete_grid && bits_ok && diverged == 0 && acc_high <= acc_low,
                 fmt::format("{} rows, bits sheaf < dfedu everywhere: {}, mean accuracy lambda=10 {:.4f} vs "
                             "lambda=1e-3 {:.4f}, {} diverged, {:.1f} s",
                             grid.size(), bits_ok ? "yes" : "no", acc_high, acc_low, diverged, elapsed));
}

Outcome determinism() {
  const std::string config = (fs::path(SHEAF_FMTL_CONFIG_DIR) / "determinism.json").string();
  const fs::path a = fs::path(SHEAF_FMTL_ACCEPTANCE_OUT) / "determinism_a";
  const fs::path b = fs::path(SHEAF_FMTL_ACCEPTANCE_OUT) / "determinism_b";
  if (run_cli(config, a) != 0 || run_cli(config, b) != 0) return verdict(false, "CLI run failed");
  const auto first = slurp(a / "metrics.csv");
  const bool same = !first.empty() && first == slurp(b / "metrics.csv") &&
                    slurp(a / "metrics_aggregate.csv") == slurp(b / "metrics_aggregate.csv");
  return verdict(same, fmt::format("metrics.csv ({} bytes) byte-identical across two runs: {}", first.size(),
                                   same ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"quadratic-form-equivalence", quadratic_form_equivalence},
      {"kernel-global-sections", kernel_global_sections},
      {"laplacian-factorization", factorization_psd},
      {"gradient-finite-differences", gradient_finite_differences},
      {"matrix-form-equivalence", matrix_form_equivalence},
      {"descent-guarantee", descent_guarantee},
      {"special-case-reductions", special_cases},
      {"communication-scaling", communication_scaling},
      {"collaboration-gain", collaboration_gain},
      {"heterogeneous-dimensions", heterogeneous_dims},
      {"topology-ablation", topology_ablation},
      {"determinism", determinism},
  };
  fs::create_directories(SHEAF_FMTL_ACCEPTANCE_OUT);
  int failures = 0;
  // Optional arguments restrict the run to the named criteria.
  const std::set<std::string> only(argv + 1, argv + argc);
  std::size_t ran = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.contains(name)) continue;
    ++ran;
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& err) {
      outcome = {false, std::string("exception: ") + err.what()};
    }
    if (!outcome.pass) ++failures;
    fmt::print("{} {}: {}\n", outcome.pass ? "PASS" : "FAIL", name, outcome.detail);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}

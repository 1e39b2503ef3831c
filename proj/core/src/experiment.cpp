#include "sheaf_fmtl/experiment.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace sheaf_fmtl {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string num(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  return fmt::format("{}", v);
}

template <class Fn>
auto with_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::invalid_argument& err) {
    throw std::invalid_argument(path + ": " + err.what());
  }
}

struct MeanErr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

MeanErr mean_stderr(const std::vector<double>& xs) {
  MeanErr out;
  if (xs.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
  }
  return out;
}

std::string file_token(const std::string& label) {
  std::string out;
  for (char c : label) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out;
}

bool has_maps(Algorithm a) { return a == Algorithm::SheafFmtl || a == Algorithm::DFedU; }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

RepeatSeeds derive_seeds(std::uint64_t seed, std::size_t repeat) {
  const std::uint64_t base = splitmix(seed ^ splitmix(static_cast<std::uint64_t>(repeat) + 1));
  return {splitmix(base + 1), splitmix(base + 2), splitmix(base + 3), splitmix(base + 4), splitmix(base + 5)};
}

RepeatSetup prepare_repeat(const ExperimentConfig& config, std::size_t repeat) {
  return prepare_repeat(config, repeat, config.topology);
}

RepeatSetup prepare_repeat(const ExperimentConfig& config, std::size_t repeat, const TopologySpec& topology) {
  const auto seeds = derive_seeds(config.seed, repeat);
  Federation fed;
  if (config.data.synthetic) {
    SynthSpec spec = *config.data.synthetic;
    spec.heterogeneity.seed = seeds.data;
    fed = with_path("config.data.synthetic", [&] { return synth_federation(spec); });
  } else {
    fed = with_path("config.data.csv", [&] { return load_csv_federation(*config.data.csv); });
  }
  RepeatSetup setup;
  SplitSpec split = config.split;
  split.seed = seeds.split;
  setup.split = with_path("config.split", [&] { return apply_split(fed, split); });
  TopologySpec topo = topology;
  topo.n = fed.size();
  topo.seed = seeds.topology;
  topo.scalar_bits = config.scalar_bits;
  setup.topology = with_path("config.topology", [&] { return gen_topology(topo); });
  setup.stalk_dims = fed.model_dims();
  setup.groups = fed.groups();
  return setup;
}

Matrix export_heatmap(const SheafGraph& sheaf, const RestrictionMaps& maps) {
  const auto n = static_cast<Eigen::Index>(sheaf.n_vertices());
  Matrix grid = Matrix::Zero(n, n);
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    const auto& edge = sheaf.graph().edge(e);
    const auto lo = static_cast<Eigen::Index>(edge.lo);
    const auto hi = static_cast<Eigen::Index>(edge.hi);
    grid(lo, hi) = maps.lower(e).norm();
    grid(hi, lo) = maps.upper(e).norm();
  }
  return grid;
}

void write_heatmap_csv(std::ostream& out, const Matrix& heatmap) {
  for (Eigen::Index i = 0; i < heatmap.rows(); ++i) {
    for (Eigen::Index j = 0; j < heatmap.cols(); ++j) out << (j ? "," : "") << num(heatmap(i, j));
    out << '\n';
  }
}

std::pair<std::optional<double>, std::optional<double>> group_norm_split(const SheafGraph& sheaf, const Matrix& heatmap,
                                                                         const std::vector<std::size_t>& groups) {
  if (groups.size() != sheaf.n_vertices() || heatmap.rows() != static_cast<Eigen::Index>(sheaf.n_vertices()))
    return {std::nullopt, std::nullopt};
  double within = 0.0, cross = 0.0;
  std::size_t nw = 0, nc = 0;
  for (const auto& edge : sheaf.graph().edges()) {
    const double v = heatmap(static_cast<Eigen::Index>(edge.lo), static_cast<Eigen::Index>(edge.hi)) +
                     heatmap(static_cast<Eigen::Index>(edge.hi), static_cast<Eigen::Index>(edge.lo));
    if (groups[edge.lo] == groups[edge.hi]) {
      within += v;
      nw += 2;
    } else {
      cross += v;
      nc += 2;
    }
  }
  std::optional<double> w, c;
  if (nw) w = within / static_cast<double>(nw);
  if (nc) c = cross / static_cast<double>(nc);
  return {w, c};
}

RunSeries run_algorithm(const ExperimentConfig& config, const RepeatSetup& setup, const AlgorithmRun& run,
                        std::size_t repeat) {
  const auto seeds = derive_seeds(config.seed, repeat);
  const double gamma = run.gamma.value_or(config.gamma);
  const auto sheaf = SheafGraph::with_gamma(setup.topology.graph, setup.stalk_dims, gamma);

  TrainerConfig trainer = run.trainer;
  trainer.eval_every = config.eval_every;
  trainer.scalar_bits = config.scalar_bits;
  trainer.convention = config.convention;
  trainer.init.seed = seeds.init;
  trainer.seed = seeds.batches;

  TrainingInputs inputs;
  inputs.sheaf = &sheaf;
  inputs.train = &setup.split.train;
  inputs.test = &setup.split.test;
  auto result = run_training(inputs, trainer);

  RunSeries series;
  series.label = run.label;
  series.algorithm = run.trainer.algorithm;
  series.repeat = repeat;
  series.history = std::move(result.history);
  series.hindsight = result.hindsight;
  series.warnings = std::move(result.warnings);
  series.payload = scalars_per_round(result.sheaf, series.algorithm);
  series.total_bits = result.ledger.total_bits(trainer.rounds, config.convention);
  if (has_maps(series.algorithm)) {
    series.heatmap = export_heatmap(result.sheaf, result.maps);
    std::tie(series.within_group_norm, series.cross_group_norm) =
        group_norm_split(result.sheaf, series.heatmap, setup.groups);
  }
  std::ostringstream ledger;
  result.ledger.write_csv(ledger, config.convention);
  series.ledger_csv = ledger.str();
  return series;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult out;
  for (std::size_t r = 0; r < config.repeats; ++r) {
    auto setup = prepare_repeat(config, r);
    for (std::size_t a = 0; a < config.algorithms.size(); ++a)
      out.runs.push_back(with_path(fmt::format("config.algorithms[{}]", a),
                                   [&] { return run_algorithm(config, setup, config.algorithms[a], r); }));
    out.setups.push_back(std::move(setup));
  }

  if (!config.ablation) return out;
  const auto& ab = *config.ablation;
  std::vector<const AlgorithmRun*> swept;
  for (const auto& run : config.algorithms) {
    const bool chosen = ab.labels.empty() ? has_maps(run.trainer.algorithm)
                                          : std::find(ab.labels.begin(), ab.labels.end(), run.label) != ab.labels.end();
    if (chosen) swept.push_back(&run);
  }
  const std::size_t repeats = ab.repeats ? ab.repeats : config.repeats;
  for (const auto& topo : ab.topologies) {
    std::vector<RepeatSetup> setups;
    for (std::size_t r = 0; r < repeats; ++r) setups.push_back(prepare_repeat(config, r, topo.spec));
    for (double lambda : ab.lambdas) {
      for (const auto* run : swept) {
        AlgorithmRun variant = *run;
        variant.trainer.lambda = lambda;
        variant.trainer.monitor_descent = false;
        AblationRow row;
        row.topology = topo.label;
        row.lambda = lambda;
        row.label = run->label;
        row.algorithm = run->trainer.algorithm;
        std::vector<double> metrics;
        std::uint64_t bits = 0;
        for (std::size_t r = 0; r < repeats; ++r) {
          try {
            auto series = run_algorithm(config, setups[r], variant, r);
            metrics.push_back(series.history.back().test ? series.history.back().test->mean
                                                         : std::numeric_limits<double>::quiet_NaN());
            bits += series.total_bits;
          } catch (const std::runtime_error&) {
            ++row.diverged;
          }
        }
        const auto stats = mean_stderr(metrics);
        row.metric_mean = stats.mean;
        row.metric_stderr = stats.stderr_;
        const std::size_t finished = repeats - row.diverged;
        row.bits_mean = finished ? bits / finished : 0;
        out.ablation.push_back(row);
      }
    }
  }
  return out;
}

void write_metrics_csv(std::ostream& out, const std::string& run_id, const std::vector<RunSeries>& runs) {
  out << "run_id,algorithm,repeat,round,cumulative_bits,test_metric,test_p10,test_p50,test_p90,psi,train_loss,"
         "max_theta_norm,max_map_norm\n";
  for (const auto& run : runs) {
    for (const auto& rec : run.history) {
      out << run_id << ',' << run.label << ',' << run.repeat << ',' << rec.round << ',' << rec.cumulative_bits << ',';
      if (rec.test) {
        out << num(rec.test->mean) << ',' << num(percentile(rec.test->per_client, 10)) << ','
            << num(percentile(rec.test->per_client, 50)) << ',' << num(percentile(rec.test->per_client, 90)) << ',';
      } else {
        out << ",,,,";
      }
      out << num(rec.psi) << ',' << num(rec.train_loss_mean) << ',' << num(rec.max_theta_norm) << ','
          << num(rec.max_map_norm) << '\n';
    }
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<RunSeries>& runs) {
  out << "algorithm,round,repeats,test_mean,test_stderr,psi_mean,psi_stderr,cumulative_bits_mean\n";
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunSeries*>> by_label;
  for (const auto& run : runs) {
    if (!by_label.contains(run.label)) order.push_back(run.label);
    by_label[run.label].push_back(&run);
  }
  for (const auto& label : order) {
    const auto& group = by_label[label];
    std::size_t rounds = std::numeric_limits<std::size_t>::max();
    for (const auto* run : group) rounds = std::min(rounds, run->history.size());
    for (std::size_t k = 0; k < rounds; ++k) {
      std::vector<double> tests, psis;
      double bits = 0.0;
      for (const auto* run : group) {
        const auto& rec = run->history[k];
        if (rec.test) tests.push_back(rec.test->mean);
        psis.push_back(rec.psi);
        bits += static_cast<double>(rec.cumulative_bits);
      }
      out << label << ',' << k << ',' << group.size() << ',';
      if (tests.size() == group.size()) {
        const auto t = mean_stderr(tests);
        out << num(t.mean) << ',' << num(t.stderr_) << ',';
      } else {
        out << ",,";
      }
      const auto p = mean_stderr(psis);
      out << num(p.mean) << ',' << num(p.stderr_) << ',' << num(bits / static_cast<double>(group.size())) << '\n';
    }
  }
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "topology,lambda,algorithm,test_mean,test_stderr,total_bits,diverged\n";
  for (const auto& row : rows)
    out << row.topology << ',' << num(row.lambda) << ',' << row.label << ',' << num(row.metric_mean) << ','
        << num(row.metric_stderr) << ',' << row.bits_mean << ',' << row.diverged << '\n';
}

std::string summary_json(const ExperimentConfig& config, const ExperimentResult& result) {
  using nlohmann::ordered_json;
  const auto finite_or_null = [](double v) -> ordered_json { return std::isfinite(v) ? ordered_json(v) : ordered_json(); };
  ordered_json doc;
  doc["run_id"] = config.run_id;
  doc["seed"] = config.seed;
  doc["repeats"] = config.repeats;
  doc["bits_convention"] = std::string(to_string(config.convention));
  doc["scalar_bits"] = config.scalar_bits;

  ordered_json repeats = ordered_json::array();
  for (std::size_t r = 0; r < result.setups.size(); ++r) {
    const auto& s = result.setups[r];
    ordered_json rep;
    rep["repeat"] = r;
    rep["edges"] = s.topology.graph.n_edges();
    rep["topology_attempts"] = s.topology.attempts;
    rep["topology_repaired"] = s.topology.repaired;
    std::vector<std::size_t> reduced;
    for (std::size_t i = 0; i < s.split.reduced.size(); ++i)
      if (s.split.reduced[i]) reduced.push_back(i);
    rep["reduced_clients"] = reduced;
    rep["stalk_dims"] = s.stalk_dims;
    repeats.push_back(rep);
  }
  doc["setups"] = repeats;

  ordered_json algs = ordered_json::array();
  for (const auto& entry : config.algorithms) {
    ordered_json a;
    a["label"] = entry.label;
    a["algorithm"] = std::string(to_string(entry.trainer.algorithm));
    a["lambda"] = entry.trainer.lambda;
    a["alpha"] = entry.trainer.alpha;
    a["eta"] = entry.trainer.eta;
    a["rounds"] = entry.trainer.rounds;
    a["gamma"] = entry.gamma.value_or(config.gamma);
    std::vector<double> finals;
    ordered_json runs = ordered_json::array();
    for (const auto& run : result.runs) {
      if (run.label != entry.label) continue;
      const auto& last = run.history.back();
      if (last.test) finals.push_back(last.test->mean);
      ordered_json rj;
      rj["repeat"] = run.repeat;
      rj["final_test_metric"] = last.test ? finite_or_null(last.test->mean) : ordered_json();
      rj["final_psi"] = finite_or_null(last.psi);
      rj["total_bits"] = run.total_bits;
      rj["scalars_per_round_table3"] = run.payload.total(BitsConvention::Table3);
      rj["scalars_per_round_algorithm1"] = run.payload.total(BitsConvention::Algorithm1);
      const auto& h = run.hindsight;
      ordered_json hj;
      hj["smoothness_L"] = h.smoothness;
      hj["domain_bound"] = h.domain_bound;
      hj["domain_bound_monitored"] = h.domain_monitored;
      hj["alpha_max"] = finite_or_null(h.alpha_max);
      hj["eta_max"] = finite_or_null(h.eta_max);
      hj["alpha_within_bound"] = h.alpha_ok;
      hj["eta_within_bound"] = h.eta_ok;
      hj["rho"] = finite_or_null(h.rho);
      hj["min_grad_sq"] = finite_or_null(h.min_grad_sq);
      hj["psi_initial"] = finite_or_null(h.psi_initial);
      hj["psi_best"] = finite_or_null(h.psi_best);
      hj["rate_bound"] = finite_or_null(h.rate_bound);
      hj["rate_holds"] = h.rate_ok;
      hj["coupling_curvature_ratio"] = h.coupling_curvature_ratio;
      rj["step_size_check"] = hj;
      rj["warnings"] = run.warnings.size();
      if (run.within_group_norm || run.cross_group_norm) {
        ordered_json g;
        g["within_group_mean_norm"] = run.within_group_norm ? ordered_json(*run.within_group_norm) : ordered_json();
        g["cross_group_mean_norm"] = run.cross_group_norm ? ordered_json(*run.cross_group_norm) : ordered_json();
        rj["map_norms"] = g;
      }
      runs.push_back(rj);
    }
    const auto stats = mean_stderr(finals);
    a["final_test_mean"] = finite_or_null(stats.mean);
    a["final_test_stderr"] = finite_or_null(stats.stderr_);
    a["runs"] = runs;
    algs.push_back(a);
  }
  doc["algorithms"] = algs;

  if (!result.ablation.empty()) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : result.ablation) {
      ordered_json rj;
      rj["topology"] = row.topology;
      rj["lambda"] = row.lambda;
      rj["algorithm"] = row.label;
      rj["test_mean"] = finite_or_null(row.metric_mean);
      rj["test_stderr"] = finite_or_null(row.metric_stderr);
      rj["total_bits"] = row.bits_mean;
      rj["diverged"] = row.diverged;
      rows.push_back(rj);
    }
    doc["ablation"] = rows;
  }
  return doc.dump(2) + "\n";
}

void write_experiment_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  {
    std::ostringstream s;
    write_metrics_csv(s, config.run_id, result.runs);
    write_file(dir / "metrics.csv", s.str());
  }
  {
    std::ostringstream s;
    write_aggregate_csv(s, result.runs);
    write_file(dir / "metrics_aggregate.csv", s.str());
  }
  write_file(dir / "summary.json", summary_json(config, result));
  for (const auto& run : result.runs) {
    const auto stem = fmt::format("{}_r{}", file_token(run.label), run.repeat);
    if (config.write_ledgers) write_file(dir / ("ledger_" + stem + ".csv"), run.ledger_csv);
    if (config.write_heatmaps && run.heatmap.size() > 0) {
      std::ostringstream s;
      write_heatmap_csv(s, run.heatmap);
      write_file(dir / ("heatmap_" + stem + ".csv"), s.str());
    }
  }
  if (!result.ablation.empty()) {
    std::ostringstream s;
    write_ablation_csv(s, result.ablation);
    write_file(dir / "ablation.csv", s.str());
  }
}

}  // namespace sheaf_fmtl

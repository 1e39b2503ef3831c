#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sheaf_fmtl/data.hpp"
#include "sheaf_fmtl/topology.hpp"
#include "sheaf_fmtl/trainer.hpp"

namespace sheaf_fmtl {

/// Exactly one of the two sources is set.
struct DataSource {
  std::optional<SynthSpec> synthetic;
  std::optional<CsvSource> csv;
};

struct AlgorithmRun {
  std::string label;  // unique within the experiment; defaults to the algorithm name
  TrainerConfig trainer;
  std::optional<double> gamma;  // overrides the experiment gamma for this entry
};

struct AblationTopology {
  std::string label;
  TopologySpec spec;  // n and seed are filled in per repeat
};

struct AblationSpec {
  std::vector<AblationTopology> topologies;
  std::vector<double> lambdas;
  std::vector<std::string> labels;  // algorithm entries to sweep; empty = all sheaf-fmtl and dfedu entries
  std::size_t repeats = 0;          // 0 = experiment repeats
};

struct ExperimentConfig {
  std::string run_id = "run";
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  std::filesystem::path output_dir = "out";
  TopologySpec topology;
  DataSource data;
  SplitSpec split;
  double gamma = 0.1;
  std::vector<AlgorithmRun> algorithms;
  std::size_t eval_every = 1;
  BitsConvention convention = BitsConvention::Table3;
  unsigned scalar_bits = 32;
  bool write_ledgers = true;
  bool write_heatmaps = true;
  std::optional<AblationSpec> ablation;

  /// Throws std::invalid_argument prefixed with the offending config path.
  void validate() const;
};

ExperimentConfig parse_experiment_config(std::string_view json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Per-repeat seeds. Every stream is derived from (global seed, repeat).
struct RepeatSeeds {
  std::uint64_t topology = 0;
  std::uint64_t data = 0;
  std::uint64_t split = 0;
  std::uint64_t init = 0;
  std::uint64_t batches = 0;
};
RepeatSeeds derive_seeds(std::uint64_t seed, std::size_t repeat);

/// The shared environment of one repeat: every algorithm trains on these.
struct RepeatSetup {
  Topology topology;
  SplitResult split;
  std::vector<std::size_t> stalk_dims;
  std::vector<std::size_t> groups;
};
RepeatSetup prepare_repeat(const ExperimentConfig& config, std::size_t repeat);
/// Same, with a different topology recipe (n and seed are overwritten).
RepeatSetup prepare_repeat(const ExperimentConfig& config, std::size_t repeat, const TopologySpec& topology);

struct RunSeries {
  std::string label;
  Algorithm algorithm = Algorithm::SheafFmtl;
  std::size_t repeat = 0;
  std::vector<RoundRecord> history;
  HindsightCheck hindsight;
  std::vector<std::string> warnings;
  RoundPayload payload;
  std::uint64_t total_bits = 0;
  Matrix heatmap;
  std::optional<double> within_group_norm;
  std::optional<double> cross_group_norm;
  std::string ledger_csv;
};

/// Trains one algorithm entry on a prepared repeat. Divergence propagates as
/// std::runtime_error.
RunSeries run_algorithm(const ExperimentConfig& config, const RepeatSetup& setup, const AlgorithmRun& run,
                        std::size_t repeat);

struct AblationRow {
  std::string topology;
  double lambda = 0.0;
  std::string label;
  Algorithm algorithm = Algorithm::SheafFmtl;
  double metric_mean = 0.0;
  double metric_stderr = 0.0;
  std::uint64_t bits_mean = 0;  // total bits over the run, averaged over repeats (floor)
  std::size_t diverged = 0;     // repeats that stopped on a non-finite state
};

struct ExperimentResult {
  std::vector<RunSeries> runs;
  std::vector<AblationRow> ablation;
  std::vector<RepeatSetup> setups;
};

/// Runs every algorithm on every repeat (and the ablation grid if configured).
/// Nothing is written to disk.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes metrics.csv, metrics_aggregate.csv, summary.json, and optional
/// ledger_*.csv, heatmap_*.csv and ablation.csv into config.output_dir.
void write_experiment_outputs(const ExperimentConfig& config, const ExperimentResult& result);

/// N x N grid with entry (i, j) = ||P_ij||_F on edges and 0 elsewhere.
Matrix export_heatmap(const SheafGraph& sheaf, const RestrictionMaps& maps);
void write_heatmap_csv(std::ostream& out, const Matrix& heatmap);

/// Mean heatmap entry over edges whose endpoints share a group, and over the rest.
std::pair<std::optional<double>, std::optional<double>> group_norm_split(const SheafGraph& sheaf, const Matrix& heatmap,
                                                                         const std::vector<std::size_t>& groups);

void write_metrics_csv(std::ostream& out, const std::string& run_id, const std::vector<RunSeries>& runs);
void write_aggregate_csv(std::ostream& out, const std::vector<RunSeries>& runs);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);
std::string summary_json(const ExperimentConfig& config, const ExperimentResult& result);

}  // namespace sheaf_fmtl

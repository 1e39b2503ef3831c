#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sheaf_fmtl/comm.hpp"
#include "sheaf_fmtl/engine.hpp"
#include "sheaf_fmtl/evaluate.hpp"

namespace sheaf_fmtl {

struct TrainerConfig {
  Algorithm algorithm = Algorithm::SheafFmtl;
  double lambda = 0.01;
  double alpha = 0.01;
  double eta = 0.01;
  std::size_t rounds = 100;
  std::size_t batch_size = 0;  // 0 = full batch
  InitSpec init{};
  std::uint64_t seed = 0;
  std::optional<double> smoothness;    // L override; estimated from data when absent
  std::optional<double> domain_bound;  // D_theta override; monitored max ||theta|| when absent
  bool freeze_maps = false;
  /// Test-only escape hatch: lets sheaf-fmtl start from all-zero maps.
  bool allow_zero_init = false;
  /// Evaluate the per-half-step descent inequalities every round (full batch only).
  bool monitor_descent = true;
  std::size_t eval_every = 1;
  std::size_t threads = 1;
  unsigned scalar_bits = 32;
  BitsConvention convention = BitsConvention::Table3;
  bool keep_messages = false;

  void validate() const;
};

struct RoundRecord {
  std::size_t round = 0;  // 0 is the initial state; k is the state after k rounds
  double psi = 0.0;
  double grad_theta_sq = 0.0;  // ||grad_theta Psi(theta^k, P^k)||^2
  double grad_p_sq = 0.0;      // ||grad_P Psi(theta^k, P^k)||^2
  double train_loss_mean = 0.0;
  std::optional<EvalResult> test;
  std::uint64_t cumulative_bits = 0;
  double max_theta_norm = 0.0;  // max_i ||theta_i||
  double theta_norm = 0.0;      // ||theta|| stacked
  double max_map_norm = 0.0;    // max ||P_ij||_F
};

/// Bookkeeping for the two per-round descent inequalities.
struct DescentCheck {
  std::size_t round = 0;
  double psi_before = 0.0;          // Psi(theta^k, P^k)
  double psi_half = 0.0;            // Psi(theta^{k+1}, P^k)
  double psi_after = 0.0;           // Psi(theta^{k+1}, P^{k+1})
  double grad_theta_sq = 0.0;       // ||grad_theta Psi(theta^k, P^k)||^2
  double grad_p_half_sq = 0.0;      // ||grad_P Psi(theta^{k+1}, P^k)||^2
  double theta_slack = 0.0;         // rhs - lhs of the theta inequality (>= 0 means held)
  double p_slack = 0.0;             // rhs - lhs of the P inequality
};

/// Whether the step sizes satisfied the convergence conditions, judged after the run.
struct HindsightCheck {
  double smoothness = 0.0;
  double domain_bound = 0.0;  // supplied D_theta or monitored max ||theta^k||
  bool domain_monitored = true;
  double alpha_max = 0.0;
  double eta_max = 0.0;
  bool alpha_ok = false;
  bool eta_ok = false;
  double rho = 0.0;
  double min_grad_sq = 0.0;   // min_k ||grad Psi(theta^k, P^k)||^2
  double psi_initial = 0.0;
  double psi_best = 0.0;
  double rate_bound = 0.0;    // (psi_initial - psi_best) / (rho K); infinity if rho <= 0
  bool rate_ok = false;
  /// Largest lambda * ||L_F|| relative to (N - 1) L over the run, estimated by power iteration.
  double coupling_curvature_ratio = 0.0;
};

struct TrainingResult {
  Algorithm algorithm = Algorithm::SheafFmtl;
  std::vector<RoundRecord> history;
  std::vector<DescentCheck> descent;
  Section theta;
  RestrictionMaps maps;
  SheafGraph sheaf;  // the sheaf actually trained on (dfedu swaps in identity maps)
  CommLedger ledger;
  std::vector<std::string> warnings;
  HindsightCheck hindsight;
};

struct TrainingInputs {
  const SheafGraph* sheaf = nullptr;
  const Federation* train = nullptr;
  const Federation* test = nullptr;          // optional
  const Section* initial_theta = nullptr;    // optional; zeros otherwise
  const RestrictionMaps* initial_maps = nullptr;  // optional; init spec otherwise
  std::function<void(const RoundRecord&)> on_round;
};

/// Runs `config.rounds` synchronous rounds.
///
/// sheaf-fmtl: exchange P theta, model step, exchange P theta+, map step.
/// dfedu: the same model step on the constant sheaf with identity maps frozen.
/// local: lambda = 0, no traffic.
/// dpsgd: Metropolis-Hastings gossip average, then a local gradient step.
///
/// Throws std::runtime_error naming the round if the state stops being finite.
TrainingResult run_training(const TrainingInputs& inputs, const TrainerConfig& config);

/// Convenience overload without test data or custom initial state.
TrainingResult run_training(const SheafGraph& sheaf, const Federation& train, const TrainerConfig& config,
                            const Federation* test = nullptr);

/// Metropolis-Hastings mixing weights: W_ij = 1 / (1 + max(deg_i, deg_j)) on edges,
/// W_ii = 1 - sum_j W_ij.
Matrix metropolis_hastings_weights(const Graph& graph);

/// Largest eigenvalue of the dense sheaf Laplacian via power iteration on the
/// matrix-free operator.
double laplacian_norm_estimate(const SheafGraph& sheaf, const RestrictionMaps& maps, std::size_t iterations = 50);

}  // namespace sheaf_fmtl

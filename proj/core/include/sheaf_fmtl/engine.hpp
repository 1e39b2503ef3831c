#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "sheaf_fmtl/comm.hpp"
#include "sheaf_fmtl/sheaf.hpp"
#include "sheaf_fmtl/tasks.hpp"

namespace sheaf_fmtl {

// ---------------------------------------------------------------------------
// Joint objective  Psi(theta, P) = sum_i f_i(theta_i) + lambda/2 * Q_F(theta; P)
// ---------------------------------------------------------------------------

/// Throws std::invalid_argument when the federation does not line up with the sheaf.
void check_federation(const SheafGraph& sheaf, const Federation& federation);

double objective_psi(const SheafGraph& sheaf, const Federation& federation, const Section& theta,
                     const RestrictionMaps& maps, double lambda);

/// grad f(theta) + lambda * L_F theta.
Section grad_theta_psi(const SheafGraph& sheaf, const Federation& federation, const Section& theta,
                       const RestrictionMaps& maps, double lambda);

/// Per-incidence blocks lambda * (P_ij theta_i - P_ji theta_j) theta_i^T, stored in a
/// RestrictionMaps with the same layout as the maps.
RestrictionMaps grad_p_psi(const SheafGraph& sheaf, const Section& theta, const RestrictionMaps& maps,
                           double lambda);

double squared_norm(const RestrictionMaps& maps);

// ---------------------------------------------------------------------------
// One round of the alternating updates, expressed per client.
// ---------------------------------------------------------------------------

struct StepParams {
  double alpha = 0.0;   // model learning rate
  double eta = 0.0;     // map learning rate
  double lambda = 0.0;  // coupling weight
};

/// Every client posts P_ij theta_i on each incident edge (length d_ij).
void post_projections(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta,
                      MessageBoard& board);

/// theta_i - alpha * (g_i + lambda * sum_j P_ij^T (P_ij theta_i - m_ji)), where m_ji is the
/// projection received from neighbour j. Uses only local state and the board.
Vector theta_step_client(std::size_t client, const SheafGraph& sheaf, const Section& theta,
                         const RestrictionMaps& maps, const Vector& local_grad, const MessageBoard& board,
                         const StepParams& params);

/// All clients, with the supplied local gradients.
Section theta_step(const SheafGraph& sheaf, const Section& theta, const RestrictionMaps& maps,
                   std::span<const Vector> local_grads, const MessageBoard& board, const StepParams& params);

/// All clients, full-batch gradients of `federation`.
Section theta_step(const SheafGraph& sheaf, const Federation& federation, const Section& theta,
                   const RestrictionMaps& maps, const MessageBoard& board, const StepParams& params);

/// P_ij - eta * lambda * (P_ij theta_i - m_ji) theta_i^T for both incidences of `e`
/// handled by `client`. `board` must hold the projections of `theta_next`.
void p_step_client(std::size_t client, const SheafGraph& sheaf, const Section& theta_next,
                   const RestrictionMaps& maps, const MessageBoard& board, const StepParams& params,
                   RestrictionMaps& out);

RestrictionMaps p_step(const SheafGraph& sheaf, const Section& theta_next, const RestrictionMaps& maps,
                       const MessageBoard& board, const StepParams& params);

// ---------------------------------------------------------------------------
// Stacked matrix form (dense oracle for the per-client path).
// ---------------------------------------------------------------------------

/// Largest total stalk dimension accepted by the dense path.
inline constexpr std::size_t kMaxDenseDim = 4096;

/// Block mask with ones exactly where the coboundary matrix has map blocks.
Matrix hadamard_mask(const SheafGraph& sheaf);

/// Inverse of coboundary_matrix: reads P_{e+} from +blocks and P_{e-} from -blocks.
RestrictionMaps maps_from_coboundary(const SheafGraph& sheaf, const Matrix& coboundary);

/// theta <- theta - alpha (grad f + lambda P^T P theta);
/// P <- H .* (P - eta lambda P theta+ theta+^T), on the dense coboundary matrix.
std::pair<Section, RestrictionMaps> matrix_form_step(const SheafGraph& sheaf, const Federation& federation,
                                                     const Section& theta, const RestrictionMaps& maps,
                                                     const StepParams& params);

// ---------------------------------------------------------------------------
// Restriction-map initialisation
// ---------------------------------------------------------------------------

enum class InitKind { Gaussian, Uniform, Orthogonal, IdentityPlusNoise, Zero };

std::string_view to_string(InitKind kind);
InitKind parse_init_kind(std::string_view name);

struct InitSpec {
  InitKind kind = InitKind::Gaussian;
  double scale = 1.0;  // sigma (gaussian), a (uniform), sigma_noise (identity-plus-noise)
  std::uint64_t seed = 0;

  void validate() const;
};

/// gaussian: N(0, scale^2); uniform: U[-scale, scale]; orthogonal: orthonormal rows;
/// identity-plus-noise: first d_ij rows of I plus N(0, scale^2); zero: all zeros.
RestrictionMaps init_maps(const InitSpec& spec, const SheafGraph& sheaf);

// ---------------------------------------------------------------------------
// Step-size conditions of the convergence theorem
// ---------------------------------------------------------------------------

struct StepBounds {
  std::size_t n_clients = 0;
  double smoothness = 0.0;    // L
  double domain_bound = 0.0;  // D_theta
  double lambda = 0.0;
  double alpha_max = 0.0;     // 2 / (N L)
  double eta_max = 0.0;       // 2 / (lambda D^2); infinity when lambda == 0

  /// min{alpha (1 - alpha N L / 2), eta (1 - eta lambda D^2 / 2)}.
  double rho(double alpha, double eta) const;
  bool admissible(double alpha, double eta) const { return alpha < alpha_max && eta < eta_max; }
};

StepBounds step_bounds(std::size_t n_clients, double smoothness, double lambda, double domain_bound);

// ---------------------------------------------------------------------------
// Classical frameworks as fixed sheaves
// ---------------------------------------------------------------------------

enum class SpecialCaseKind { ConventionalFmtl, ConventionalFl, PersonalizedFl, HybridFl };

struct SpecialCase {
  SpecialCaseKind kind = SpecialCaseKind::ConventionalFl;
  /// conventional-fmtl: one positive weight a_ij per edge of the base graph (graph order).
  std::vector<double> weights;
  /// hybrid-fl: for client i, the server coordinates it keeps (row r of Pi_i selects
  /// coordinate selections[i][r]).
  std::vector<std::vector<std::size_t>> selections;
  std::size_t server_dim = 0;  // hybrid-fl only
};

struct SpecialSheaf {
  SheafGraph sheaf;
  RestrictionMaps maps;
  bool frozen = true;
  /// Vertex index of the server for star cases; n_vertices() otherwise.
  std::size_t server = 0;
};

/// conventional-fmtl: P_ij = sqrt(a_ij) I; conventional-fl: P_ij = I on the base graph.
/// personalized-fl / hybrid-fl: star with server vertex 0 and base client i at vertex i+1;
/// maps I / I and Pi_i / I respectively. `client_dims` lists d_i for the base clients.
SpecialSheaf special_case_sheaf(const SpecialCase& special, const Graph& base,
                                std::span<const std::size_t> client_dims);

/// Selection matrix with a single 1 per row at column selections[r].
Matrix selection_matrix(std::span<const std::size_t> selected, std::size_t server_dim);

}  // namespace sheaf_fmtl

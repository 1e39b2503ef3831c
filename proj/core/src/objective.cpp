#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "sheaf_fmtl/engine.hpp"

namespace sheaf_fmtl {

void check_federation(const SheafGraph& sheaf, const Federation& federation) {
  if (federation.size() != sheaf.n_vertices())
    throw std::invalid_argument("federation has " + std::to_string(federation.size()) + " clients, sheaf has " +
                                std::to_string(sheaf.n_vertices()) + " vertices");
  for (std::size_t i = 0; i < federation.size(); ++i) {
    if (federation.clients[i].model_dim() != sheaf.stalk_dim(i))
      throw std::invalid_argument("client " + std::to_string(i) + " has model dimension " +
                                  std::to_string(federation.clients[i].model_dim()) + " but stalk dimension " +
                                  std::to_string(sheaf.stalk_dim(i)));
  }
}

double objective_psi(const SheafGraph& sheaf, const Federation& federation, const Section& theta,
                     const RestrictionMaps& maps, double lambda) {
  check_federation(sheaf, federation);
  double total = 0.0;
  for (std::size_t i = 0; i < federation.size(); ++i) total += loss_eval(federation.clients[i], theta[i]);
  if (lambda != 0.0) total += 0.5 * lambda * quadratic_form(sheaf, maps, theta);
  return total;
}

Section grad_theta_psi(const SheafGraph& sheaf, const Federation& federation, const Section& theta,
                       const RestrictionMaps& maps, double lambda) {
  check_federation(sheaf, federation);
  Section lap = laplacian_apply(sheaf, maps, theta);
  for (std::size_t i = 0; i < federation.size(); ++i)
    lap[i] = loss_grad(federation.clients[i], theta[i]) + lambda * lap[i];
  return lap;
}

RestrictionMaps grad_p_psi(const SheafGraph& sheaf, const Section& theta, const RestrictionMaps& maps,
                           double lambda) {
  maps.validate(sheaf);
  check_section(sheaf, theta);
  auto grad = RestrictionMaps::zeros(sheaf);
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    const auto& edge = sheaf.graph().edge(e);
    const Vector diff = maps.upper(e) * theta[edge.hi] - maps.lower(e) * theta[edge.lo];
    grad.upper(e).noalias() = lambda * diff * theta[edge.hi].transpose();
    grad.lower(e).noalias() = -lambda * diff * theta[edge.lo].transpose();
  }
  return grad;
}

double squared_norm(const RestrictionMaps& maps) {
  double total = 0.0;
  for (std::size_t e = 0; e < maps.n_edges(); ++e) total += maps.lower(e).squaredNorm() + maps.upper(e).squaredNorm();
  return total;
}

double StepBounds::rho(double alpha, double eta) const {
  const double theta_part = alpha * (1.0 - alpha * static_cast<double>(n_clients) * smoothness / 2.0);
  const double map_part = eta * (1.0 - eta * lambda * domain_bound * domain_bound / 2.0);
  return std::min(theta_part, map_part);
}

StepBounds step_bounds(std::size_t n_clients, double smoothness, double lambda, double domain_bound) {
  if (n_clients == 0) throw std::invalid_argument("step bounds need at least one client");
  if (!(smoothness > 0.0)) throw std::invalid_argument("smoothness constant L must be positive");
  if (!(domain_bound > 0.0)) throw std::invalid_argument("domain bound D_theta must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  StepBounds b;
  b.n_clients = n_clients;
  b.smoothness = smoothness;
  b.domain_bound = domain_bound;
  b.lambda = lambda;
  b.alpha_max = 2.0 / (static_cast<double>(n_clients) * smoothness);
  b.eta_max = lambda > 0.0 ? 2.0 / (lambda * domain_bound * domain_bound) : std::numeric_limits<double>::infinity();
  return b;
}

}  // namespace sheaf_fmtl

#include <stdexcept>
#include <string>

#include "sheaf_fmtl/engine.hpp"

namespace sheaf_fmtl {

void post_projections(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta,
                      MessageBoard& board) {
  check_section(sheaf, theta);
  for (std::size_t i = 0; i < sheaf.n_vertices(); ++i)
    for (const auto& inc : sheaf.graph().incidences(i)) board.post(i, inc.edge, maps.at(inc.edge, i) * theta[i]);
}

Vector theta_step_client(std::size_t client, const SheafGraph& sheaf, const Section& theta,
                         const RestrictionMaps& maps, const Vector& local_grad, const MessageBoard& board,
                         const StepParams& params) {
  const Vector& own = theta[client];
  if (local_grad.size() != own.size())
    throw std::invalid_argument("local gradient of client " + std::to_string(client) + " has the wrong length");
  Vector coupling = Vector::Zero(own.size());
  for (const auto& inc : sheaf.graph().incidences(client)) {
    const Matrix& p = maps.at(inc.edge, client);
    const Vector& received = board.receive(client, inc.edge);
    if (received.size() != p.rows())
      throw std::invalid_argument("message on edge " + std::to_string(inc.edge) + " has length " +
                                  std::to_string(received.size()) + ", expected " + std::to_string(p.rows()));
    coupling.noalias() += p.transpose() * (p * own - received);
  }
  return own - params.alpha * (local_grad + params.lambda * coupling);
}

Section theta_step(const SheafGraph& sheaf, const Section& theta, const RestrictionMaps& maps,
                   std::span<const Vector> local_grads, const MessageBoard& board, const StepParams& params) {
  check_section(sheaf, theta);
  maps.validate(sheaf);
  if (local_grads.size() != sheaf.n_vertices()) throw std::invalid_argument("need one local gradient per client");
  std::vector<Vector> next(sheaf.n_vertices());
  for (std::size_t i = 0; i < sheaf.n_vertices(); ++i)
    next[i] = theta_step_client(i, sheaf, theta, maps, local_grads[i], board, params);
  return Section(std::move(next));
}

Section theta_step(const SheafGraph& sheaf, const Federation& federation, const Section& theta,
                   const RestrictionMaps& maps, const MessageBoard& board, const StepParams& params) {
  check_federation(sheaf, federation);
  std::vector<Vector> grads;
  grads.reserve(federation.size());
  for (std::size_t i = 0; i < federation.size(); ++i) grads.push_back(loss_grad(federation.clients[i], theta[i]));
  return theta_step(sheaf, theta, maps, grads, board, params);
}

void p_step_client(std::size_t client, const SheafGraph& sheaf, const Section& theta_next,
                   const RestrictionMaps& maps, const MessageBoard& board, const StepParams& params,
                   RestrictionMaps& out) {
  const Vector& own = theta_next[client];
  for (const auto& inc : sheaf.graph().incidences(client)) {
    const Matrix& p = maps.at(inc.edge, client);
    const Vector& received = board.receive(client, inc.edge);
    if (received.size() != p.rows())
      throw std::invalid_argument("message on edge " + std::to_string(inc.edge) + " has length " +
                                  std::to_string(received.size()) + ", expected " + std::to_string(p.rows()));
    const Vector diff = p * own - received;
    out.at(inc.edge, client) = p - (params.eta * params.lambda) * diff * own.transpose();
  }
}

RestrictionMaps p_step(const SheafGraph& sheaf, const Section& theta_next, const RestrictionMaps& maps,
                       const MessageBoard& board, const StepParams& params) {
  check_section(sheaf, theta_next);
  maps.validate(sheaf);
  RestrictionMaps out = maps;
  for (std::size_t i = 0; i < sheaf.n_vertices(); ++i) p_step_client(i, sheaf, theta_next, maps, board, params, out);
  return out;
}

Matrix hadamard_mask(const SheafGraph& sheaf) {
  Matrix mask = Matrix::Zero(static_cast<Eigen::Index>(sheaf.total_edge_dim()),
                             static_cast<Eigen::Index>(sheaf.total_stalk_dim()));
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    const auto& edge = sheaf.graph().edge(e);
    const auto row = static_cast<Eigen::Index>(sheaf.edge_offset(e));
    const auto rows = static_cast<Eigen::Index>(sheaf.edge_dim(e));
    for (const auto v : {edge.lo, edge.hi})
      mask.block(row, static_cast<Eigen::Index>(sheaf.stalk_offset(v)), rows,
                 static_cast<Eigen::Index>(sheaf.stalk_dim(v)))
          .setOnes();
  }
  return mask;
}

RestrictionMaps maps_from_coboundary(const SheafGraph& sheaf, const Matrix& coboundary) {
  if (coboundary.rows() != static_cast<Eigen::Index>(sheaf.total_edge_dim()) ||
      coboundary.cols() != static_cast<Eigen::Index>(sheaf.total_stalk_dim()))
    throw std::invalid_argument("coboundary matrix shape does not match the sheaf");
  auto maps = RestrictionMaps::zeros(sheaf);
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    const auto& edge = sheaf.graph().edge(e);
    const auto row = static_cast<Eigen::Index>(sheaf.edge_offset(e));
    const auto rows = static_cast<Eigen::Index>(sheaf.edge_dim(e));
    maps.upper(e) = coboundary.block(row, static_cast<Eigen::Index>(sheaf.stalk_offset(edge.hi)), rows,
                                     static_cast<Eigen::Index>(sheaf.stalk_dim(edge.hi)));
    maps.lower(e) = -coboundary.block(row, static_cast<Eigen::Index>(sheaf.stalk_offset(edge.lo)), rows,
                                      static_cast<Eigen::Index>(sheaf.stalk_dim(edge.lo)));
  }
  return maps;
}

std::pair<Section, RestrictionMaps> matrix_form_step(const SheafGraph& sheaf, const Federation& federation,
                                                     const Section& theta, const RestrictionMaps& maps,
                                                     const StepParams& params) {
  check_federation(sheaf, federation);
  if (sheaf.total_stalk_dim() > kMaxDenseDim)
    throw std::invalid_argument("total model dimension " + std::to_string(sheaf.total_stalk_dim()) +
                                " is too large for the dense matrix form (limit " + std::to_string(kMaxDenseDim) + ")");
  const Matrix coboundary = coboundary_matrix(sheaf, maps);
  const Vector flat = theta.flatten();

  std::vector<Vector> grads;
  grads.reserve(federation.size());
  for (std::size_t i = 0; i < federation.size(); ++i) grads.push_back(loss_grad(federation.clients[i], theta[i]));
  const Vector grad_f = Section(std::move(grads)).flatten();

  const Vector next = flat - params.alpha * (grad_f + params.lambda * (coboundary.transpose() * (coboundary * flat)));
  const Matrix updated =
      hadamard_mask(sheaf).cwiseProduct(coboundary - (params.eta * params.lambda) * (coboundary * next) * next.transpose());
  return {Section::from_flat(sheaf.stalk_dims(), next), maps_from_coboundary(sheaf, updated)};
}

}  // namespace sheaf_fmtl

#include <cmath>
#include <stdexcept>
#include <string>

#include "sheaf_fmtl/engine.hpp"

namespace sheaf_fmtl {

Matrix selection_matrix(std::span<const std::size_t> selected, std::size_t server_dim) {
  Matrix pi = Matrix::Zero(static_cast<Eigen::Index>(selected.size()), static_cast<Eigen::Index>(server_dim));
  for (std::size_t r = 0; r < selected.size(); ++r) {
    if (selected[r] >= server_dim)
      throw std::invalid_argument("selection index " + std::to_string(selected[r]) + " exceeds server dimension " +
                                  std::to_string(server_dim));
    pi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(selected[r])) = 1.0;
  }
  return pi;
}

namespace {

void require_equal_dims(std::span<const std::size_t> dims, std::string_view what) {
  for (auto d : dims)
    if (d != dims.front())
      throw std::invalid_argument(std::string(what) + " requires every client to have the same model dimension");
}

Graph star(std::size_t n_clients) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i <= n_clients; ++i) edges.emplace_back(0, i);
  return Graph(n_clients + 1, edges);
}

}  // namespace

SpecialSheaf special_case_sheaf(const SpecialCase& special, const Graph& base,
                                std::span<const std::size_t> client_dims) {
  if (client_dims.size() != base.n_vertices())
    throw std::invalid_argument("need one model dimension per base-graph vertex");
  if (client_dims.empty()) throw std::invalid_argument("special case needs at least one client");

  switch (special.kind) {
    case SpecialCaseKind::ConventionalFmtl:
    case SpecialCaseKind::ConventionalFl: {
      require_equal_dims(client_dims, "conventional FL/FMTL");
      const auto p = client_dims.front();
      const bool weighted = special.kind == SpecialCaseKind::ConventionalFmtl;
      if (weighted && special.weights.size() != base.n_edges())
        throw std::invalid_argument("conventional FMTL needs one weight per edge");
      auto sheaf = SheafGraph::with_edge_dims(base, {client_dims.begin(), client_dims.end()},
                                              std::vector<std::size_t>(base.n_edges(), p));
      auto maps = RestrictionMaps::zeros(sheaf);
      const auto eye = Matrix::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
      for (std::size_t e = 0; e < base.n_edges(); ++e) {
        double scale = 1.0;
        if (weighted) {
          if (!(special.weights[e] > 0.0)) throw std::invalid_argument("edge weights a_ij must be positive");
          scale = std::sqrt(special.weights[e]);
        }
        maps.lower(e) = scale * eye;
        maps.upper(e) = scale * eye;
      }
      return SpecialSheaf{std::move(sheaf), std::move(maps), true, base.n_vertices()};
    }
    case SpecialCaseKind::PersonalizedFl: {
      require_equal_dims(client_dims, "personalized FL");
      const auto p = client_dims.front();
      const auto n = client_dims.size();
      auto sheaf = SheafGraph::with_edge_dims(star(n), std::vector<std::size_t>(n + 1, p),
                                              std::vector<std::size_t>(n, p));
      auto maps = RestrictionMaps::zeros(sheaf);
      for (std::size_t e = 0; e < n; ++e) {
        maps.lower(e).setIdentity();
        maps.upper(e).setIdentity();
      }
      return SpecialSheaf{std::move(sheaf), std::move(maps), true, 0};
    }
    case SpecialCaseKind::HybridFl: {
      const auto n = client_dims.size();
      if (special.server_dim == 0) throw std::invalid_argument("hybrid FL needs a positive server dimension");
      if (special.selections.size() != n) throw std::invalid_argument("hybrid FL needs one selection per client");
      std::vector<std::size_t> dims{special.server_dim};
      for (std::size_t i = 0; i < n; ++i) {
        if (special.selections[i].size() != client_dims[i])
          throw std::invalid_argument("selection of client " + std::to_string(i) + " must pick exactly d_i coordinates");
        if (client_dims[i] > special.server_dim)
          throw std::invalid_argument("hybrid FL requires d_i <= d_0");
        dims.push_back(client_dims[i]);
      }
      auto sheaf = SheafGraph::with_edge_dims(star(n), dims, {client_dims.begin(), client_dims.end()});
      auto maps = RestrictionMaps::zeros(sheaf);
      // Edge e joins server 0 (lower end) and client e+1 (upper end).
      for (std::size_t e = 0; e < n; ++e) {
        maps.lower(e) = selection_matrix(special.selections[e], special.server_dim);
        maps.upper(e).setIdentity();
      }
      return SpecialSheaf{std::move(sheaf), std::move(maps), true, 0};
    }
  }
  throw std::invalid_argument("unknown special case");
}

}  // namespace sheaf_fmtl

#include "sheaf_fmtl/sheaf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>
#include <stdexcept>
#include <string>

namespace sheaf_fmtl {

namespace {

std::string edge_name(std::size_t a, std::size_t b) {
  return "{" + std::to_string(a) + "," + std::to_string(b) + "}";
}

}  // namespace

Graph::Graph(std::size_t n_vertices, std::span<const std::pair<std::size_t, std::size_t>> edges)
    : n_vertices_(n_vertices), adjacency_(n_vertices) {
  edges_.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    if (a >= n_vertices || b >= n_vertices)
      throw std::invalid_argument("edge " + edge_name(a, b) + " references a vertex outside [0, " +
                                  std::to_string(n_vertices) + ")");
    if (a == b) throw std::invalid_argument("self-loop at vertex " + std::to_string(a));
    edges_.push_back({std::min(a, b), std::max(a, b)});
  }
  std::sort(edges_.begin(), edges_.end(),
            [](const Edge& x, const Edge& y) { return std::tie(x.lo, x.hi) < std::tie(y.lo, y.hi); });
  for (std::size_t e = 1; e < edges_.size(); ++e) {
    if (edges_[e] == edges_[e - 1])
      throw std::invalid_argument("duplicate edge " + edge_name(edges_[e].lo, edges_[e].hi));
  }
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    adjacency_[edges_[e].lo].push_back({e, edges_[e].hi});
    adjacency_[edges_[e].hi].push_back({e, edges_[e].lo});
  }
}

std::size_t Graph::find_edge(std::size_t a, std::size_t b) const {
  if (a >= n_vertices_ || b >= n_vertices_) return edges_.size();
  for (const auto& inc : adjacency_[a])
    if (inc.neighbor == b) return inc.edge;
  return edges_.size();
}

std::vector<std::size_t> Graph::components() const {
  constexpr auto unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> label(n_vertices_, unset);
  std::vector<std::size_t> stack;
  std::size_t next = 0;
  for (std::size_t root = 0; root < n_vertices_; ++root) {
    if (label[root] != unset) continue;
    label[root] = next;
    stack.push_back(root);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (const auto& inc : adjacency_[v]) {
        if (label[inc.neighbor] == unset) {
          label[inc.neighbor] = next;
          stack.push_back(inc.neighbor);
        }
      }
    }
    ++next;
  }
  return label;
}

bool Graph::is_connected() const {
  if (n_vertices_ == 0) return false;
  const auto label = components();
  return std::all_of(label.begin(), label.end(), [](std::size_t l) { return l == 0; });
}

SheafGraph::SheafGraph(Graph graph, std::vector<std::size_t> stalk_dims,
                       std::vector<std::size_t> edge_dims)
    : graph_(std::move(graph)), stalk_dims_(std::move(stalk_dims)), edge_dims_(std::move(edge_dims)) {
  if (graph_.n_vertices() == 0) throw std::invalid_argument("sheaf needs at least one vertex");
  if (!graph_.is_connected()) throw std::invalid_argument("graph is not connected");
  if (stalk_dims_.size() != graph_.n_vertices())
    throw std::invalid_argument("expected " + std::to_string(graph_.n_vertices()) +
                                " stalk dimensions, got " + std::to_string(stalk_dims_.size()));
  if (edge_dims_.size() != graph_.n_edges())
    throw std::invalid_argument("expected " + std::to_string(graph_.n_edges()) +
                                " edge dimensions, got " + std::to_string(edge_dims_.size()));
  for (std::size_t i = 0; i < stalk_dims_.size(); ++i) {
    if (stalk_dims_[i] == 0)
      throw std::invalid_argument("stalk dimension of vertex " + std::to_string(i) + " must be >= 1");
    stalk_offsets_.push_back(stalk_offsets_.back() + stalk_dims_[i]);
  }
  for (std::size_t e = 0; e < edge_dims_.size(); ++e) {
    if (edge_dims_[e] == 0)
      throw std::invalid_argument("edge dimension of edge " +
                                  edge_name(graph_.edge(e).lo, graph_.edge(e).hi) + " must be >= 1");
    edge_offsets_.push_back(edge_offsets_.back() + edge_dims_[e]);
  }
}

SheafGraph SheafGraph::with_gamma(Graph graph, std::vector<std::size_t> stalk_dims, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("gamma must lie in (0, 1], got " + std::to_string(gamma));
  if (stalk_dims.size() != graph.n_vertices())
    throw std::invalid_argument("stalk dimension count does not match vertex count");
  std::vector<std::size_t> edge_dims;
  edge_dims.reserve(graph.n_edges());
  for (const auto& e : graph.edges()) {
    const auto smaller = static_cast<double>(std::min(stalk_dims[e.lo], stalk_dims[e.hi]));
    // 0.29 * 100 evaluates to 28.999...; the guard keeps integral products intact.
    const auto floored = static_cast<std::size_t>(std::floor(gamma * smaller + 1e-9));
    edge_dims.push_back(std::max<std::size_t>(floored, 1));
  }
  return SheafGraph(std::move(graph), std::move(stalk_dims), std::move(edge_dims));
}

SheafGraph SheafGraph::with_edge_dims(Graph graph, std::vector<std::size_t> stalk_dims,
                                      std::vector<std::size_t> edge_dims) {
  return SheafGraph(std::move(graph), std::move(stalk_dims), std::move(edge_dims));
}

RestrictionMaps RestrictionMaps::zeros(const SheafGraph& sheaf) {
  RestrictionMaps maps;
  maps.edges_ = sheaf.graph().edges();
  maps.maps_.reserve(2 * sheaf.n_edges());
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    const auto& edge = sheaf.graph().edge(e);
    const auto rows = static_cast<Eigen::Index>(sheaf.edge_dim(e));
    maps.maps_.push_back(Matrix::Zero(rows, static_cast<Eigen::Index>(sheaf.stalk_dim(edge.lo))));
    maps.maps_.push_back(Matrix::Zero(rows, static_cast<Eigen::Index>(sheaf.stalk_dim(edge.hi))));
  }
  return maps;
}

Matrix& RestrictionMaps::at(std::size_t e, std::size_t vertex) {
  const auto& edge = edges_.at(e);
  if (vertex == edge.lo) return maps_[2 * e];
  if (vertex == edge.hi) return maps_[2 * e + 1];
  throw std::out_of_range("vertex " + std::to_string(vertex) + " is not an endpoint of edge " +
                          std::to_string(e));
}

const Matrix& RestrictionMaps::at(std::size_t e, std::size_t vertex) const {
  return const_cast<RestrictionMaps&>(*this).at(e, vertex);
}

void RestrictionMaps::validate(const SheafGraph& sheaf) const {
  if (edges_ != sheaf.graph().edges())
    throw std::invalid_argument("restriction maps were built for a different edge set");
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto rows = static_cast<Eigen::Index>(sheaf.edge_dim(e));
    const auto check = [&](const Matrix& m, std::size_t vertex) {
      if (m.rows() != rows || m.cols() != static_cast<Eigen::Index>(sheaf.stalk_dim(vertex)))
        throw std::invalid_argument("map for vertex " + std::to_string(vertex) + " on edge " +
                                    edge_name(edges_[e].lo, edges_[e].hi) + " has shape " +
                                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                    ", expected " + std::to_string(rows) + "x" +
                                    std::to_string(sheaf.stalk_dim(vertex)));
      if (!m.allFinite())
        throw std::invalid_argument("map for vertex " + std::to_string(vertex) + " on edge " +
                                    edge_name(edges_[e].lo, edges_[e].hi) + " has non-finite entries");
    };
    check(maps_[2 * e], edges_[e].lo);
    check(maps_[2 * e + 1], edges_[e].hi);
  }
}

bool RestrictionMaps::all_finite() const {
  return std::all_of(maps_.begin(), maps_.end(), [](const Matrix& m) { return m.allFinite(); });
}

double RestrictionMaps::max_frobenius_norm() const {
  double best = 0.0;
  for (const auto& m : maps_) best = std::max(best, m.norm());
  return best;
}

void check_section(const SheafGraph& sheaf, const Section& theta) {
  if (theta.n_blocks() != sheaf.n_vertices())
    throw std::invalid_argument("section has " + std::to_string(theta.n_blocks()) + " blocks, sheaf has " +
                                std::to_string(sheaf.n_vertices()) + " vertices");
  for (std::size_t i = 0; i < theta.n_blocks(); ++i) {
    if (static_cast<std::size_t>(theta[i].size()) != sheaf.stalk_dim(i))
      throw std::invalid_argument("section block " + std::to_string(i) + " has length " +
                                  std::to_string(theta[i].size()) + ", expected " +
                                  std::to_string(sheaf.stalk_dim(i)));
  }
}

namespace {

void check_inputs(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta) {
  maps.validate(sheaf);
  check_section(sheaf, theta);
}

Vector edge_discrepancy(const RestrictionMaps& maps, const Edge& edge, std::size_t e, const Section& theta) {
  return maps.upper(e) * theta[edge.hi] - maps.lower(e) * theta[edge.lo];
}

}  // namespace

EdgeVector coboundary_apply(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta) {
  check_inputs(sheaf, maps, theta);
  std::vector<Vector> blocks;
  blocks.reserve(sheaf.n_edges());
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e)
    blocks.push_back(edge_discrepancy(maps, sheaf.graph().edge(e), e, theta));
  return EdgeVector(std::move(blocks));
}

Section laplacian_apply(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta) {
  check_inputs(sheaf, maps, theta);
  auto out = Section::zeros(sheaf.stalk_dims());
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    const auto& edge = sheaf.graph().edge(e);
    const Vector diff = edge_discrepancy(maps, edge, e, theta);
    out[edge.hi].noalias() += maps.upper(e).transpose() * diff;
    out[edge.lo].noalias() -= maps.lower(e).transpose() * diff;
  }
  return out;
}

Matrix coboundary_matrix(const SheafGraph& sheaf, const RestrictionMaps& maps) {
  maps.validate(sheaf);
  Matrix delta = Matrix::Zero(static_cast<Eigen::Index>(sheaf.total_edge_dim()),
                              static_cast<Eigen::Index>(sheaf.total_stalk_dim()));
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    const auto& edge = sheaf.graph().edge(e);
    const auto row = static_cast<Eigen::Index>(sheaf.edge_offset(e));
    const auto rows = static_cast<Eigen::Index>(sheaf.edge_dim(e));
    delta.block(row, static_cast<Eigen::Index>(sheaf.stalk_offset(edge.hi)), rows, maps.upper(e).cols()) =
        maps.upper(e);
    delta.block(row, static_cast<Eigen::Index>(sheaf.stalk_offset(edge.lo)), rows, maps.lower(e).cols()) =
        -maps.lower(e);
  }
  return delta;
}

Matrix laplacian_matrix(const SheafGraph& sheaf, const RestrictionMaps& maps) {
  maps.validate(sheaf);
  const auto total = static_cast<Eigen::Index>(sheaf.total_stalk_dim());
  Matrix lap = Matrix::Zero(total, total);
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    const auto& edge = sheaf.graph().edge(e);
    const auto lo = static_cast<Eigen::Index>(sheaf.stalk_offset(edge.lo));
    const auto hi = static_cast<Eigen::Index>(sheaf.stalk_offset(edge.hi));
    const Matrix& p_lo = maps.lower(e);
    const Matrix& p_hi = maps.upper(e);
    lap.block(lo, lo, p_lo.cols(), p_lo.cols()) += p_lo.transpose() * p_lo;
    lap.block(hi, hi, p_hi.cols(), p_hi.cols()) += p_hi.transpose() * p_hi;
    lap.block(lo, hi, p_lo.cols(), p_hi.cols()) -= p_lo.transpose() * p_hi;
    lap.block(hi, lo, p_hi.cols(), p_lo.cols()) -= p_hi.transpose() * p_lo;
  }
  return lap;
}

double quadratic_form(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta) {
  check_inputs(sheaf, maps, theta);
  double total = 0.0;
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e)
    total += edge_discrepancy(maps, sheaf.graph().edge(e), e, theta).squaredNorm();
  return total;
}

bool is_global_section(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta,
                       double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  check_inputs(sheaf, maps, theta);
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    if (edge_discrepancy(maps, sheaf.graph().edge(e), e, theta).norm() > tol) return false;
  }
  return true;
}

}  // namespace sheaf_fmtl

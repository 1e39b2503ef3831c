#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sheaf_fmtl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Undirected edge stored under the canonical orientation: `lo` is e-, `hi` is e+.
struct Edge {
  std::size_t lo = 0;
  std::size_t hi = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// One endpoint's view of an incident edge.
struct Incidence {
  std::size_t edge = 0;
  std::size_t neighbor = 0;
};

/// Simple undirected graph. Edges are normalized to (min, max) and sorted
/// lexicographically, so the edge index of {i, j} does not depend on input order.
class Graph {
 public:
  Graph() = default;
  /// Throws std::invalid_argument on self-loops, duplicates or out-of-range vertices.
  Graph(std::size_t n_vertices, std::span<const std::pair<std::size_t, std::size_t>> edges);

  std::size_t n_vertices() const { return n_vertices_; }
  std::size_t n_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_.at(e); }
  const std::vector<Incidence>& incidences(std::size_t vertex) const { return adjacency_.at(vertex); }
  std::size_t degree(std::size_t vertex) const { return adjacency_.at(vertex).size(); }

  /// Edge index of {a, b}, or n_edges() when absent.
  std::size_t find_edge(std::size_t a, std::size_t b) const;

  /// Component label per vertex, labels dense from 0 in order of first vertex.
  std::vector<std::size_t> components() const;
  bool is_connected() const;

 private:
  std::size_t n_vertices_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<Incidence>> adjacency_;
};

/// Graph plus vertex stalk dimensions d_i and edge stalk dimensions d_ij.
class SheafGraph {
 public:
  SheafGraph() = default;

  /// d_ij = max(1, floor(gamma * min(d_i, d_j))). Rejects gamma outside (0, 1].
  static SheafGraph with_gamma(Graph graph, std::vector<std::size_t> stalk_dims, double gamma);
  /// Explicit edge dimensions, one per edge in graph order.
  static SheafGraph with_edge_dims(Graph graph, std::vector<std::size_t> stalk_dims,
                                   std::vector<std::size_t> edge_dims);

  const Graph& graph() const { return graph_; }
  std::size_t n_vertices() const { return graph_.n_vertices(); }
  std::size_t n_edges() const { return graph_.n_edges(); }

  std::size_t stalk_dim(std::size_t vertex) const { return stalk_dims_.at(vertex); }
  std::size_t edge_dim(std::size_t e) const { return edge_dims_.at(e); }
  const std::vector<std::size_t>& stalk_dims() const { return stalk_dims_; }
  const std::vector<std::size_t>& edge_dims() const { return edge_dims_; }

  std::size_t stalk_offset(std::size_t vertex) const { return stalk_offsets_.at(vertex); }
  std::size_t edge_offset(std::size_t e) const { return edge_offsets_.at(e); }
  std::size_t total_stalk_dim() const { return stalk_offsets_.back(); }
  std::size_t total_edge_dim() const { return edge_offsets_.back(); }

 private:
  SheafGraph(Graph graph, std::vector<std::size_t> stalk_dims, std::vector<std::size_t> edge_dims);

  Graph graph_;
  std::vector<std::size_t> stalk_dims_;
  std::vector<std::size_t> edge_dims_;
  std::vector<std::size_t> stalk_offsets_{0};
  std::vector<std::size_t> edge_offsets_{0};
};

/// Per-block vector. `Tag` separates vertex cochains from edge cochains at compile time.
template <class Tag>
class BlockVector {
 public:
  BlockVector() = default;
  explicit BlockVector(std::vector<Vector> blocks) : blocks_(std::move(blocks)) {}

  static BlockVector zeros(std::span<const std::size_t> dims) {
    std::vector<Vector> blocks;
    blocks.reserve(dims.size());
    for (auto d : dims) blocks.push_back(Vector::Zero(static_cast<Eigen::Index>(d)));
    return BlockVector(std::move(blocks));
  }

  static BlockVector from_flat(std::span<const std::size_t> dims, const Vector& flat) {
    std::vector<Vector> blocks;
    blocks.reserve(dims.size());
    Eigen::Index offset = 0;
    for (auto d : dims) {
      const auto n = static_cast<Eigen::Index>(d);
      blocks.push_back(flat.segment(offset, n));
      offset += n;
    }
    return BlockVector(std::move(blocks));
  }

  std::size_t n_blocks() const { return blocks_.size(); }
  Vector& operator[](std::size_t i) { return blocks_[i]; }
  const Vector& operator[](std::size_t i) const { return blocks_[i]; }
  const std::vector<Vector>& blocks() const { return blocks_; }

  std::size_t total_dim() const {
    std::size_t total = 0;
    for (const auto& b : blocks_) total += static_cast<std::size_t>(b.size());
    return total;
  }

  Vector flatten() const {
    Vector flat(static_cast<Eigen::Index>(total_dim()));
    Eigen::Index offset = 0;
    for (const auto& b : blocks_) {
      flat.segment(offset, b.size()) = b;
      offset += b.size();
    }
    return flat;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& b : blocks_) s += b.squaredNorm();
    return s;
  }

  bool all_finite() const {
    for (const auto& b : blocks_)
      if (!b.allFinite()) return false;
    return true;
  }

 private:
  std::vector<Vector> blocks_;
};

struct VertexTag {};
struct EdgeTag {};

/// Element of C^0: one model vector per client.
using Section = BlockVector<VertexTag>;
/// Element of C^1: one interaction-space vector per edge.
using EdgeVector = BlockVector<EdgeTag>;

/// Restriction maps P_ij, two per edge. For edge e the map of its lower endpoint
/// is stored at slot 2e and the map of its upper endpoint at slot 2e+1.
class RestrictionMaps {
 public:
  RestrictionMaps() = default;

  static RestrictionMaps zeros(const SheafGraph& sheaf);

  /// Map of `vertex` onto edge `e`; `vertex` must be an endpoint of `e`.
  Matrix& at(std::size_t e, std::size_t vertex);
  const Matrix& at(std::size_t e, std::size_t vertex) const;

  Matrix& lower(std::size_t e) { return maps_[2 * e]; }
  const Matrix& lower(std::size_t e) const { return maps_[2 * e]; }
  Matrix& upper(std::size_t e) { return maps_[2 * e + 1]; }
  const Matrix& upper(std::size_t e) const { return maps_[2 * e + 1]; }

  std::size_t n_edges() const { return edges_.size(); }
  const Edge& edge(std::size_t e) const { return edges_.at(e); }

  /// Throws std::invalid_argument when edge set, shapes or finiteness disagree with `sheaf`.
  void validate(const SheafGraph& sheaf) const;
  bool all_finite() const;
  double max_frobenius_norm() const;

 private:
  std::vector<Edge> edges_;
  std::vector<Matrix> maps_;
};

/// delta(theta)_e = P_{e+} theta_{e+} - P_{e-} theta_{e-}.
EdgeVector coboundary_apply(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta);

/// L_F theta, accumulated edge by edge without assembling L_F.
Section laplacian_apply(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta);

/// Dense coboundary matrix (total_edge_dim x total_stalk_dim). Oracle path only.
Matrix coboundary_matrix(const SheafGraph& sheaf, const RestrictionMaps& maps);

/// Dense sheaf Laplacian assembled from its diagonal and off-diagonal blocks. Oracle path only.
Matrix laplacian_matrix(const SheafGraph& sheaf, const RestrictionMaps& maps);

/// Sum over edges of ||P_ij theta_i - P_ji theta_j||^2.
double quadratic_form(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta);

/// True iff every edge discrepancy has Euclidean norm <= tol.
bool is_global_section(const SheafGraph& sheaf, const RestrictionMaps& maps, const Section& theta,
                       double tol);

/// Throws std::invalid_argument if `theta` does not match the stalk dimensions.
void check_section(const SheafGraph& sheaf, const Section& theta);

}  // namespace sheaf_fmtl

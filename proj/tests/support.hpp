#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sheaf_fmtl/engine.hpp"
#include "sheaf_fmtl/sheaf.hpp"
#include "sheaf_fmtl/tasks.hpp"

namespace sheaf_fmtl::testing {

inline double gauss(std::mt19937_64& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t uniform_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random spanning tree plus extra edges with probability p.
inline Graph random_connected_graph(std::size_t n, double p, std::mt19937_64& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t v = 1; v < n; ++v) edges.emplace_back(uniform_size(rng, 0, v - 1), v);
  std::bernoulli_distribution coin(p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      bool present = false;
      for (const auto& [a, b] : edges) present = present || (std::min(a, b) == i && std::max(a, b) == j);
      if (!present && coin(rng)) edges.emplace_back(i, j);
    }
  return Graph(n, edges);
}

inline Graph path_graph(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t v = 1; v < n; ++v) edges.emplace_back(v - 1, v);
  return Graph(n, edges);
}

/// Random sheaf with d_i in [1, max_d] and d_ij in [1, max_de].
inline SheafGraph random_sheaf(std::mt19937_64& rng, std::size_t max_n = 8, std::size_t max_d = 5,
                               std::size_t max_de = 4) {
  const auto n = uniform_size(rng, 2, max_n);
  auto graph = random_connected_graph(n, 0.4, rng);
  std::vector<std::size_t> dims(n);
  for (auto& d : dims) d = uniform_size(rng, 1, max_d);
  std::vector<std::size_t> edge_dims(graph.n_edges());
  for (auto& d : edge_dims) d = uniform_size(rng, 1, max_de);
  return SheafGraph::with_edge_dims(std::move(graph), std::move(dims), std::move(edge_dims));
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * gauss(rng);
  return m;
}

inline RestrictionMaps random_maps(const SheafGraph& sheaf, std::mt19937_64& rng, double scale = 1.0) {
  auto maps = RestrictionMaps::zeros(sheaf);
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    maps.lower(e) = random_matrix(maps.lower(e).rows(), maps.lower(e).cols(), rng, scale);
    maps.upper(e) = random_matrix(maps.upper(e).rows(), maps.upper(e).cols(), rng, scale);
  }
  return maps;
}

inline RestrictionMaps identity_maps(const SheafGraph& sheaf) {
  auto maps = RestrictionMaps::zeros(sheaf);
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    maps.lower(e).setIdentity();
    maps.upper(e).setIdentity();
  }
  return maps;
}

inline Section random_section(std::span<const std::size_t> dims, std::mt19937_64& rng, double scale = 1.0) {
  auto s = Section::zeros(dims);
  for (std::size_t i = 0; i < s.n_blocks(); ++i)
    for (Eigen::Index k = 0; k < s[i].size(); ++k) s[i][k] = scale * gauss(rng);
  return s;
}

/// Columns spanning the numerical null space (threshold 1e-10 * sigma_max).
inline Matrix null_space(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double sigma_max = sv.size() ? sv.maxCoeff() : 0.0;
  const double threshold = 1e-10 * std::max(sigma_max, 1e-300);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > threshold) ++rank;
  return svd.matrixV().rightCols(a.cols() - rank);
}

inline ClientData regression_client(std::size_t n, std::size_t p, std::mt19937_64& rng, double l2 = 1e-3) {
  ClientData c;
  c.kind = TaskKind::Regression;
  c.features = random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p), rng);
  c.targets = Vector(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < c.targets.size(); ++i) c.targets[i] = gauss(rng);
  c.l2 = l2;
  return c;
}

inline ClientData multinomial_client(std::size_t n, std::size_t p, std::size_t classes, std::mt19937_64& rng,
                                     double l2 = 1e-3) {
  ClientData c;
  c.kind = TaskKind::Multinomial;
  c.features = random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p), rng);
  c.targets = Vector(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < c.targets.size(); ++i)
    c.targets[i] = static_cast<double>(uniform_size(rng, 0, classes - 1));
  c.num_classes = classes;
  c.l2 = l2;
  return c;
}

/// Regression federation whose feature counts equal the sheaf's stalk dimensions.
inline Federation regression_federation(const SheafGraph& sheaf, std::mt19937_64& rng, std::size_t n = 12,
                                        double l2 = 1e-3) {
  Federation fed;
  for (std::size_t i = 0; i < sheaf.n_vertices(); ++i) fed.clients.push_back(regression_client(n, sheaf.stalk_dim(i), rng, l2));
  return fed;
}

/// Mixed federation: even stalk dims become 2-class multinomial clients, odd ones regression.
inline Federation mixed_federation(const SheafGraph& sheaf, std::mt19937_64& rng, std::size_t n = 10) {
  Federation fed;
  for (std::size_t i = 0; i < sheaf.n_vertices(); ++i) {
    const auto d = sheaf.stalk_dim(i);
    fed.clients.push_back(d % 2 == 0 ? multinomial_client(n, d / 2, 2, rng) : regression_client(n, d, rng));
  }
  return fed;
}

/// Central finite-difference gradient with step h.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  Vector y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = y[i];
    y[i] = saved + h;
    const double up = f(y);
    y[i] = saved - h;
    const double down = f(y);
    y[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

/// Flattens all maps into one vector (slot order) and back.
inline Vector flatten_maps(const RestrictionMaps& maps) {
  std::vector<double> out;
  for (std::size_t e = 0; e < maps.n_edges(); ++e)
    for (const Matrix* m : {&maps.lower(e), &maps.upper(e)})
      for (Eigen::Index r = 0; r < m->rows(); ++r)
        for (Eigen::Index c = 0; c < m->cols(); ++c) out.push_back((*m)(r, c));
  return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

inline RestrictionMaps unflatten_maps(RestrictionMaps maps, const Vector& flat) {
  Eigen::Index k = 0;
  for (std::size_t e = 0; e < maps.n_edges(); ++e)
    for (Matrix* m : {&maps.lower(e), &maps.upper(e)})
      for (Eigen::Index r = 0; r < m->rows(); ++r)
        for (Eigen::Index c = 0; c < m->cols(); ++c) (*m)(r, c) = flat[k++];
  return maps;
}

inline double max_abs_diff(const RestrictionMaps& a, const RestrictionMaps& b) {
  return (flatten_maps(a) - flatten_maps(b)).cwiseAbs().maxCoeff();
}

inline double max_abs_diff(const Section& a, const Section& b) {
  return (a.flatten() - b.flatten()).cwiseAbs().maxCoeff();
}

}  // namespace sheaf_fmtl::testing

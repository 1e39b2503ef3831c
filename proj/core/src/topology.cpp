#include "sheaf_fmtl/topology.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace sheaf_fmtl {

namespace {

using EdgeSet = std::set<std::pair<std::size_t, std::size_t>>;

void add_edge(EdgeSet& edges, std::size_t a, std::size_t b) {
  edges.emplace(std::min(a, b), std::max(a, b));
}

EdgeSet sample_erdos_renyi(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  EdgeSet edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (coin(rng)) edges.emplace(i, j);
  return edges;
}

// Ring lattice with k/2 neighbours per side; each lattice edge (i, i+s) has its
// far endpoint rewired with probability p to a uniformly chosen vertex that
// keeps the graph simple.
EdgeSet sample_watts_strogatz(std::size_t n, std::size_t k, double p, std::mt19937_64& rng) {
  EdgeSet edges;
  const std::size_t half = k / 2;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 1; s <= half; ++s) add_edge(edges, i, (i + s) % n);

  std::bernoulli_distribution coin(p);
  for (std::size_t s = 1; s <= half; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!coin(rng)) continue;
      const std::size_t old = (i + s) % n;
      std::vector<std::size_t> choices;
      for (std::size_t v = 0; v < n; ++v) {
        if (v != i && !edges.contains({std::min(i, v), std::max(i, v)})) choices.push_back(v);
      }
      if (choices.empty()) continue;
      const std::size_t target = choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
      edges.erase({std::min(i, old), std::max(i, old)});
      add_edge(edges, i, target);
    }
  }
  return edges;
}

// Preferential attachment seeded with a star on m + 1 vertices.
EdgeSet sample_barabasi_albert(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  EdgeSet edges;
  std::vector<std::size_t> endpoints;  // each vertex repeated once per incident edge
  for (std::size_t v = 1; v <= m; ++v) {
    add_edge(edges, 0, v);
    endpoints.push_back(0);
    endpoints.push_back(v);
  }
  for (std::size_t v = m + 1; v < n; ++v) {
    std::set<std::size_t> targets;
    while (targets.size() < m) {
      const auto idx = std::uniform_int_distribution<std::size_t>(0, endpoints.size() - 1)(rng);
      targets.insert(endpoints[idx]);
    }
    for (auto t : targets) {
      add_edge(edges, v, t);
      endpoints.push_back(v);
      endpoints.push_back(t);
    }
  }
  return edges;
}

EdgeSet sample(const TopologySpec& spec, std::mt19937_64& rng) {
  EdgeSet edges;
  switch (spec.kind) {
    case TopologyKind::ErdosRenyi:
      return sample_erdos_renyi(spec.n, spec.edge_probability, rng);
    case TopologyKind::WattsStrogatz:
      return sample_watts_strogatz(spec.n, spec.ring_neighbors, spec.rewire_probability, rng);
    case TopologyKind::BarabasiAlbert:
      return sample_barabasi_albert(spec.n, spec.attachments, rng);
    case TopologyKind::Complete:
      for (std::size_t i = 0; i < spec.n; ++i)
        for (std::size_t j = i + 1; j < spec.n; ++j) edges.emplace(i, j);
      return edges;
    case TopologyKind::Star:
      for (std::size_t j = 1; j < spec.n; ++j) edges.emplace(0, j);
      return edges;
  }
  return edges;
}

Graph to_graph(std::size_t n, const EdgeSet& edges) {
  std::vector<std::pair<std::size_t, std::size_t>> list(edges.begin(), edges.end());
  return Graph(n, list);
}

}  // namespace

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::ErdosRenyi: return "erdos-renyi";
    case TopologyKind::WattsStrogatz: return "watts-strogatz";
    case TopologyKind::BarabasiAlbert: return "barabasi-albert";
    case TopologyKind::Complete: return "complete";
    case TopologyKind::Star: return "star";
  }
  return "unknown";
}

TopologyKind parse_topology_kind(std::string_view name) {
  for (auto kind : {TopologyKind::ErdosRenyi, TopologyKind::WattsStrogatz, TopologyKind::BarabasiAlbert,
                    TopologyKind::Complete, TopologyKind::Star}) {
    if (name == to_string(kind)) return kind;
  }
  if (name == "small-world") return TopologyKind::WattsStrogatz;
  if (name == "scale-free") return TopologyKind::BarabasiAlbert;
  throw std::invalid_argument("unknown topology kind '" + std::string(name) + "'");
}

void TopologySpec::validate() const {
  if (n < 2) throw std::invalid_argument("topology needs at least 2 vertices");
  if (scalar_bits != 32 && scalar_bits != 64)
    throw std::invalid_argument("scalar width must be 32 or 64 bits");
  switch (kind) {
    case TopologyKind::ErdosRenyi:
      if (!(edge_probability > 0.0 && edge_probability <= 1.0))
        throw std::invalid_argument("erdos-renyi p must lie in (0, 1]");
      break;
    case TopologyKind::WattsStrogatz:
      if (ring_neighbors < 2 || ring_neighbors % 2 != 0)
        throw std::invalid_argument("watts-strogatz k must be an even number >= 2");
      if (ring_neighbors >= n) throw std::invalid_argument("watts-strogatz k must be smaller than n");
      if (!(rewire_probability >= 0.0 && rewire_probability <= 1.0))
        throw std::invalid_argument("watts-strogatz rewiring probability must lie in [0, 1]");
      break;
    case TopologyKind::BarabasiAlbert:
      if (attachments < 1 || attachments >= n)
        throw std::invalid_argument("barabasi-albert m must satisfy 1 <= m < n");
      break;
    case TopologyKind::Complete:
    case TopologyKind::Star:
      break;
  }
}

Topology gen_topology(const TopologySpec& spec) {
  spec.validate();
  EdgeSet edges;
  const std::size_t cap = std::max<std::size_t>(spec.max_resamples, 1);
  for (std::size_t attempt = 0; attempt < cap; ++attempt) {
    std::mt19937_64 rng(spec.seed + attempt);
    edges = sample(spec, rng);
    Graph graph = to_graph(spec.n, edges);
    if (graph.is_connected()) return Topology{std::move(graph), attempt + 1, false};
  }

  // Bridge the components of the last sample.
  std::mt19937_64 rng(spec.seed + cap);
  const auto label = to_graph(spec.n, edges).components();
  const auto n_components = *std::max_element(label.begin(), label.end()) + 1;
  std::vector<std::vector<std::size_t>> members(n_components);
  for (std::size_t v = 0; v < spec.n; ++v) members[label[v]].push_back(v);
  const auto pick = [&](const std::vector<std::size_t>& group) {
    return group[std::uniform_int_distribution<std::size_t>(0, group.size() - 1)(rng)];
  };
  for (std::size_t c = 1; c < n_components; ++c) add_edge(edges, pick(members[c - 1]), pick(members[c]));
  return Topology{to_graph(spec.n, edges), cap, true};
}

void write_edge_list(std::ostream& out, const Graph& graph) {
  out << "# undirected edge list, canonical (lo, hi) orientation\n";
  out << "n " << graph.n_vertices() << '\n';
  for (const auto& e : graph.edges()) out << e.lo << ' ' << e.hi << '\n';
}

Graph read_edge_list(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> n;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    if (!n) {
      std::string tag;
      std::size_t count = 0;
      if (!(fields >> tag >> count) || tag != "n")
        throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": expected 'n <count>' header");
      n = count;
      continue;
    }
    std::size_t a = 0, b = 0;
    if (!(fields >> a >> b))
      throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": expected two vertex ids");
    edges.emplace_back(a, b);
  }
  if (!n) throw std::invalid_argument("edge list is missing its 'n <count>' header");
  return Graph(*n, edges);
}

void save_edge_list(const std::filesystem::path& path, const Graph& graph) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_edge_list(out, graph);
}

Graph load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_edge_list(in);
}

}  // namespace sheaf_fmtl

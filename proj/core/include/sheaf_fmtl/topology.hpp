#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "sheaf_fmtl/sheaf.hpp"

namespace sheaf_fmtl {

enum class TopologyKind { ErdosRenyi, WattsStrogatz, BarabasiAlbert, Complete, Star };

std::string_view to_string(TopologyKind kind);
TopologyKind parse_topology_kind(std::string_view name);

struct TopologySpec {
  TopologyKind kind = TopologyKind::ErdosRenyi;
  std::size_t n = 10;
  double edge_probability = 0.2;  // erdos-renyi p
  std::size_t ring_neighbors = 4;  // watts-strogatz k
  double rewire_probability = 0.1;  // watts-strogatz p
  std::size_t attachments = 2;  // barabasi-albert m
  std::uint64_t seed = 0;
  unsigned scalar_bits = 32;
  std::size_t max_resamples = 100;

  /// Throws std::invalid_argument on parameters outside their domain.
  void validate() const;
};

struct Topology {
  Graph graph;
  std::size_t attempts = 1;  // samples drawn, including the accepted one
  bool repaired = false;     // true if bridging edges had to be added
};

/// Samples a connected simple graph. Disconnected samples are redrawn with
/// seed + attempt; after `max_resamples` the last sample is bridged by joining
/// random representatives of consecutive components.
Topology gen_topology(const TopologySpec& spec);

/// Text format: a header line "n <vertex-count>" followed by one "lo hi" line
/// per edge. Lines starting with '#' are comments.
void write_edge_list(std::ostream& out, const Graph& graph);
Graph read_edge_list(std::istream& in);
void save_edge_list(const std::filesystem::path& path, const Graph& graph);
Graph load_edge_list(const std::filesystem::path& path);

}  // namespace sheaf_fmtl

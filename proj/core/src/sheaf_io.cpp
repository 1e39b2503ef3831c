#include "sheaf_fmtl/sheaf_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sheaf_fmtl {

using nlohmann::json;

std::string write_sheaf_json(const SheafGraph& sheaf, const RestrictionMaps* maps) {
  json doc;
  doc["vertices"] = sheaf.n_vertices();
  doc["stalk_dims"] = sheaf.stalk_dims();
  json edges = json::array();
  for (const auto& e : sheaf.graph().edges()) edges.push_back({e.lo, e.hi});
  doc["edges"] = std::move(edges);
  doc["edge_dims"] = sheaf.edge_dims();
  if (maps != nullptr) {
    maps->validate(sheaf);
    json entries = json::array();
    for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
      const auto& edge = sheaf.graph().edge(e);
      for (const auto vertex : {edge.lo, edge.hi}) {
        const Matrix& m = maps->at(e, vertex);
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(m.size()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
          for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
        entries.push_back({{"edge", {edge.lo, edge.hi}},
                           {"vertex", vertex},
                           {"rows", m.rows()},
                           {"cols", m.cols()},
                           {"data", std::move(data)}});
      }
    }
    doc["maps"] = std::move(entries);
  }
  return doc.dump(2);
}

SheafDocument read_sheaf_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    throw std::invalid_argument(std::string("sheaf document is not valid JSON: ") + err.what());
  }
  try {
    const auto n = doc.at("vertices").get<std::size_t>();
    auto stalk_dims = doc.at("stalk_dims").get<std::vector<std::size_t>>();
    auto pairs = doc.at("edges").get<std::vector<std::pair<std::size_t, std::size_t>>>();
    auto edge_dims = doc.at("edge_dims").get<std::vector<std::size_t>>();
    if (edge_dims.size() != pairs.size())
      throw std::invalid_argument("edge_dims and edges differ in length");

    // Edge dims are listed in document order; the graph re-sorts edges.
    Graph graph(n, pairs);
    std::vector<std::size_t> sorted_dims(graph.n_edges());
    for (std::size_t k = 0; k < pairs.size(); ++k)
      sorted_dims[graph.find_edge(pairs[k].first, pairs[k].second)] = edge_dims[k];

    SheafDocument out{SheafGraph::with_edge_dims(std::move(graph), std::move(stalk_dims),
                                                 std::move(sorted_dims)),
                      std::nullopt};
    if (doc.contains("maps")) {
      auto maps = RestrictionMaps::zeros(out.sheaf);
      std::vector<int> seen(2 * out.sheaf.n_edges(), 0);
      for (const auto& entry : doc.at("maps")) {
        const auto ends = entry.at("edge").get<std::pair<std::size_t, std::size_t>>();
        const auto e = out.sheaf.graph().find_edge(ends.first, ends.second);
        if (e == out.sheaf.n_edges())
          throw std::invalid_argument("map entry references unknown edge {" + std::to_string(ends.first) +
                                      "," + std::to_string(ends.second) + "}");
        const auto vertex = entry.at("vertex").get<std::size_t>();
        Matrix& m = maps.at(e, vertex);
        const auto rows = entry.at("rows").get<Eigen::Index>();
        const auto cols = entry.at("cols").get<Eigen::Index>();
        const auto data = entry.at("data").get<std::vector<double>>();
        if (rows != m.rows() || cols != m.cols() || data.size() != static_cast<std::size_t>(rows * cols))
          throw std::invalid_argument("map entry for vertex " + std::to_string(vertex) + " on edge {" +
                                      std::to_string(ends.first) + "," + std::to_string(ends.second) +
                                      "} has inconsistent shape");
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
        ++seen[2 * e + (vertex == out.sheaf.graph().edge(e).hi ? 1 : 0)];
      }
      for (std::size_t slot = 0; slot < seen.size(); ++slot) {
        if (seen[slot] != 1)
          throw std::invalid_argument("every incidence needs exactly one map entry (edge index " +
                                      std::to_string(slot / 2) + ")");
      }
      maps.validate(out.sheaf);
      out.maps = std::move(maps);
    }
    return out;
  } catch (const json::exception& err) {
    throw std::invalid_argument(std::string("malformed sheaf document: ") + err.what());
  }
}

void save_sheaf(const std::filesystem::path& path, const SheafGraph& sheaf, const RestrictionMaps* maps) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << write_sheaf_json(sheaf, maps) << '\n';
}

SheafDocument load_sheaf(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return read_sheaf_json(buffer.str());
}

}  // namespace sheaf_fmtl

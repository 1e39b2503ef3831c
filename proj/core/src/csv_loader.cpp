#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sheaf_fmtl/data.hpp"

namespace sheaf_fmtl {

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

struct RawClient {
  std::string name;
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
};

double parse_cell(const std::string& cell, const std::filesystem::path& file, std::size_t line,
                  const std::string& column) {
  const auto where = [&] { return fmt::format("{}: row {} column '{}'", file.string(), line, column); };
  if (cell.empty()) throw std::invalid_argument(where() + ": empty cell");
  char* end = nullptr;
  const double value = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) throw std::invalid_argument(where() + ": non-numeric value '" + cell + "'");
  if (std::isnan(value)) throw std::invalid_argument(where() + ": NaN value");
  if (!std::isfinite(value)) throw std::invalid_argument(where() + ": infinite value");
  return value;
}

std::vector<RawClient> read_file(const std::filesystem::path& path, const CsvSource& source,
                                 std::vector<std::string>& feature_names) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": file is empty");
  const auto header = split_row(line);

  std::optional<std::size_t> target_col, client_col;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == source.target_column) {
      target_col = c;
    } else if (source.client_column && header[c] == *source.client_column) {
      client_col = c;
    } else {
      feature_cols.push_back(c);
      feature_names.push_back(header[c]);
    }
  }
  if (!target_col) throw std::invalid_argument(path.string() + ": missing target column '" + source.target_column + "'");
  if (source.client_column && !client_col)
    throw std::invalid_argument(path.string() + ": missing client column '" + *source.client_column + "'");
  if (feature_cols.empty()) throw std::invalid_argument(path.string() + ": no feature columns");

  std::vector<RawClient> clients;
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size())
      throw std::invalid_argument(fmt::format("{}: row {} has {} cells, header has {}", path.string(), line_no,
                                              cells.size(), header.size()));
    std::string id = client_col ? cells[*client_col] : path.stem().string();
    auto [it, inserted] = index.try_emplace(id, clients.size());
    if (inserted) clients.push_back(RawClient{id, {}, {}});
    auto& client = clients[it->second];
    std::vector<double> row;
    row.reserve(feature_cols.size());
    for (auto c : feature_cols) row.push_back(parse_cell(cells[c], path, line_no, header[c]));
    client.rows.push_back(std::move(row));
    client.targets.push_back(parse_cell(cells[*target_col], path, line_no, header[*target_col]));
  }
  if (clients.empty()) throw std::invalid_argument(path.string() + ": client has no data rows");
  return clients;
}

}  // namespace

Federation load_csv_federation(const CsvSource& source) {
  if (source.files.empty()) throw std::invalid_argument("CSV source lists no files");
  if (source.task == TaskKind::Null) throw std::invalid_argument("CSV clients need a data-bearing task kind");
  std::vector<RawClient> raw;
  std::vector<std::size_t> widths;
  for (const auto& file : source.files) {
    std::vector<std::string> names;
    auto clients = read_file(file, source, names);
    for (auto& c : clients) {
      widths.push_back(names.size());
      raw.push_back(std::move(c));
    }
  }

  std::size_t classes = source.num_classes;
  if (source.task == TaskKind::Multinomial && classes == 0) {
    double top = 0.0;
    for (const auto& c : raw)
      for (double y : c.targets) top = std::max(top, y);
    classes = static_cast<std::size_t>(top) + 1;
  }

  Federation fed;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const auto& r = raw[k];
    ClientData client;
    client.kind = source.task;
    client.num_classes = source.task == TaskKind::Multinomial ? classes : 0;
    client.l2 = source.l2;
    client.features.resize(static_cast<Eigen::Index>(r.rows.size()), static_cast<Eigen::Index>(widths[k]));
    client.targets.resize(static_cast<Eigen::Index>(r.rows.size()));
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      for (std::size_t f = 0; f < widths[k]; ++f)
        client.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = r.rows[i][f];
      client.targets[static_cast<Eigen::Index>(i)] = r.targets[i];
    }
    try {
      client.validate();
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument("client '" + r.name + "': " + err.what());
    }
    fed.clients.push_back(std::move(client));
  }
  return fed;
}

void write_client_csv(const std::filesystem::path& path, const ClientData& client) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "target";
  for (std::size_t f = 0; f < client.n_features(); ++f) out << ",x" << f;
  out << '\n';
  for (Eigen::Index r = 0; r < client.features.rows(); ++r) {
    out << fmt::format("{}", client.targets[r]);
    for (Eigen::Index f = 0; f < client.features.cols(); ++f) out << ',' << fmt::format("{}", client.features(r, f));
    out << '\n';
  }
}

}  // namespace sheaf_fmtl

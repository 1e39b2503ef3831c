#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "sheaf_fmtl/data.hpp"

namespace sheaf_fmtl {

namespace {

std::size_t floor_count(double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); }

// Train rows for one client: exactly `n_train` rows, stratified by class with
// largest-remainder quotas when requested.
std::vector<std::size_t> choose_train(const ClientData& client, std::size_t n_train, bool stratify,
                                      std::mt19937_64& rng) {
  const auto n = client.n_samples();
  std::vector<std::size_t> chosen;
  if (!stratify) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  } else {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t r = 0; r < n; ++r) by_class[client.label(r)].push_back(r);
    std::vector<std::size_t> quota;
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    std::size_t k = 0;
    for (const auto& [label, rows] : by_class) {
      const double exact = static_cast<double>(n_train) * static_cast<double>(rows.size()) / static_cast<double>(n);
      quota.push_back(floor_count(exact));
      assigned += quota.back();
      remainders.emplace_back(exact - static_cast<double>(quota.back()), k++);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < n_train; ++r, ++assigned) ++quota[remainders[r % remainders.size()].second];
    k = 0;
    for (auto& [label, rows] : by_class) {
      std::shuffle(rows.begin(), rows.end(), rng);
      chosen.insert(chosen.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(quota[k], rows.size())));
      ++k;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

void standardize(ClientData& train, ClientData& test) {
  const auto n = static_cast<double>(train.n_samples());
  const Eigen::RowVectorXd mean = train.features.colwise().mean();
  Eigen::RowVectorXd sd = ((train.features.rowwise() - mean).array().square().colwise().sum() / n).sqrt();
  for (Eigen::Index f = 0; f < sd.size(); ++f)
    if (!(sd[f] > 0.0)) sd[f] = 1.0;
  train.features = (train.features.rowwise() - mean).array().rowwise() / sd.array();
  test.features = (test.features.rowwise() - mean).array().rowwise() / sd.array();
}

}  // namespace

void SplitSpec::validate() const {
  const auto in_open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_open_unit(train_fraction)) throw std::invalid_argument("train fraction must lie in (0, 1)");
  if (!in_open_unit(reduced_fraction)) throw std::invalid_argument("reduced-client fraction must lie in (0, 1)");
  if (!in_open_unit(reduction_ratio))
    throw std::invalid_argument("reduction ratio must lie in (0, 1) so reduced clients keep at least one train sample");
}

SplitResult apply_split(const Federation& federation, const SplitSpec& spec) {
  spec.validate();
  federation.validate();
  const auto n_clients = federation.size();
  SplitResult out;
  out.reduced.assign(n_clients, false);
  out.train_before_reduction.assign(n_clients, 0);

  std::mt19937_64 rng(spec.seed);
  std::vector<std::size_t> order(n_clients);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_reduced = floor_count(static_cast<double>(n_clients) * spec.reduced_fraction);
  for (std::size_t k = 0; k < n_reduced; ++k) out.reduced[order[k]] = true;

  for (std::size_t i = 0; i < n_clients; ++i) {
    const auto& client = federation.clients[i];
    if (client.kind == TaskKind::Null) {
      out.train.clients.push_back(client);
      out.test.clients.push_back(client);
      continue;
    }
    const auto n = client.n_samples();
    if (n < 2)
      throw std::invalid_argument("client " + std::to_string(i) + " has " + std::to_string(n) +
                                  " samples; a split needs at least 2");
    const auto n_train = std::clamp<std::size_t>(floor_count(spec.train_fraction * static_cast<double>(n)), 1, n - 1);

    bool stratify = false;
    if (client.kind == TaskKind::Multinomial) {
      std::map<int, std::size_t> counts;
      for (std::size_t r = 0; r < n; ++r) ++counts[client.label(r)];
      stratify = std::all_of(counts.begin(), counts.end(), [](const auto& kv) { return kv.second >= 4; });
    }
    std::mt19937_64 client_rng(spec.seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
    auto train_rows = choose_train(client, n_train, stratify, client_rng);
    std::vector<std::size_t> test_rows;
    for (std::size_t r = 0, t = 0; r < n; ++r) {
      if (t < train_rows.size() && train_rows[t] == r) {
        ++t;
      } else {
        test_rows.push_back(r);
      }
    }
    out.train_before_reduction[i] = train_rows.size();

    if (out.reduced[i]) {
      const auto keep = std::max<std::size_t>(
          1, floor_count(static_cast<double>(train_rows.size()) * (1.0 - spec.reduction_ratio)));
      std::shuffle(train_rows.begin(), train_rows.end(), client_rng);
      train_rows.resize(keep);
      std::sort(train_rows.begin(), train_rows.end());
    }

    ClientData train = client.subset(train_rows);
    ClientData test = client.subset(test_rows);
    if (spec.standardize) standardize(train, test);
    out.train.clients.push_back(std::move(train));
    out.test.clients.push_back(std::move(test));
  }
  return out;
}

}  // namespace sheaf_fmtl

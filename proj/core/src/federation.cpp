#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "sheaf_fmtl/data.hpp"

namespace sheaf_fmtl {

namespace {

std::mt19937_64 client_rng(std::uint64_t seed, std::size_t client) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(client + 1)};
  return std::mt19937_64(seq);
}

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * normal(rng);
  return m;
}

std::vector<std::size_t> client_sizes(const SynthSpec& spec) {
  const auto n = spec.clients;
  std::vector<double> weight(n, 1.0);
  if (spec.heterogeneity.kind == HeterogeneityKind::QuantitySkew && n > 1) {
    for (std::size_t i = 0; i < n; ++i)
      weight[i] = std::pow(spec.heterogeneity.imbalance_ratio, -static_cast<double>(i) / static_cast<double>(n - 1));
  }
  const double total_weight = std::accumulate(weight.begin(), weight.end(), 0.0);
  std::vector<std::size_t> sizes(n);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sizes[i] = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(static_cast<double>(spec.samples) * weight[i] / total_weight)));
    assigned += sizes[i];
  }
  // Hand out the remainder to the largest clients first; trim from the largest if the clamp overshot.
  for (std::size_t i = 0; assigned < spec.samples; i = (i + 1) % n, ++assigned) ++sizes[i];
  for (std::size_t i = 0; assigned > spec.samples; i = (i + 1) % n) {
    if (sizes[i] > 1) {
      --sizes[i];
      --assigned;
    }
  }
  return sizes;
}

std::size_t group_of(std::size_t client, std::size_t clients, std::size_t groups) {
  return client * groups / clients;
}

}  // namespace

std::string_view to_string(HeterogeneityKind kind) {
  switch (kind) {
    case HeterogeneityKind::FeatureRotationGroups: return "feature-rotation-groups";
    case HeterogeneityKind::LabelSkew: return "label-skew";
    case HeterogeneityKind::ConceptShift: return "concept-shift";
    case HeterogeneityKind::QuantitySkew: return "quantity-skew";
    case HeterogeneityKind::Iid: return "iid";
  }
  return "unknown";
}

HeterogeneityKind parse_heterogeneity_kind(std::string_view name) {
  for (auto k : {HeterogeneityKind::FeatureRotationGroups, HeterogeneityKind::LabelSkew,
                 HeterogeneityKind::ConceptShift, HeterogeneityKind::QuantitySkew, HeterogeneityKind::Iid})
    if (name == to_string(k)) return k;
  throw std::invalid_argument("unknown heterogeneity kind '" + std::string(name) + "'");
}

void SynthSpec::validate() const {
  const auto& het = heterogeneity;
  if (clients < 2) throw std::invalid_argument("synthetic federation needs at least 2 clients");
  if (features < 2) throw std::invalid_argument("synthetic federation needs at least 2 features");
  if (task == TaskKind::Null) throw std::invalid_argument("synthetic federation needs a data-bearing task kind");
  if (task == TaskKind::Multinomial && classes < 2)
    throw std::invalid_argument("classification needs at least 2 classes");
  if (samples < clients)
    throw std::invalid_argument("infeasible: " + std::to_string(samples) + " samples for " +
                                std::to_string(clients) + " clients");
  if (!feature_dims.empty()) {
    if (feature_dims.size() != clients) throw std::invalid_argument("feature_dims needs one entry per client");
    for (auto d : feature_dims)
      if (d == 0 || d > features) throw std::invalid_argument("feature_dims entries must lie in [1, features]");
  }
  if (!(noise >= 0.0) || !(class_separation >= 0.0))
    throw std::invalid_argument("noise and class separation must be non-negative");
  if (!(l2 >= 0.0)) throw std::invalid_argument("L2 coefficient must be non-negative");
  switch (het.kind) {
    case HeterogeneityKind::FeatureRotationGroups:
    case HeterogeneityKind::ConceptShift:
      if (het.groups < 1 || het.groups > clients)
        throw std::invalid_argument("group count must lie in [1, clients]");
      if (het.rotation_axes[0] == het.rotation_axes[1] || het.rotation_axes[0] >= features ||
          het.rotation_axes[1] >= features)
        throw std::invalid_argument("rotation axes must be two distinct feature indices");
      break;
    case HeterogeneityKind::LabelSkew: {
      if (task != TaskKind::Multinomial) throw std::invalid_argument("label skew requires a classification task");
      const auto k = het.classes_per_client == 0 ? (classes + 1) / 2 : het.classes_per_client;
      if (k > classes) throw std::invalid_argument("classes per client exceeds class count");
      if (samples / clients < k)
        throw std::invalid_argument("infeasible: clients cannot hold " + std::to_string(k) + " distinct classes");
      break;
    }
    case HeterogeneityKind::QuantitySkew:
      if (!(het.imbalance_ratio >= 1.0)) throw std::invalid_argument("imbalance ratio must be >= 1");
      break;
    case HeterogeneityKind::Iid:
      break;
  }
}

Federation synth_federation(const SynthSpec& spec) {
  spec.validate();
  const auto& het = spec.heterogeneity;
  const auto p = static_cast<Eigen::Index>(spec.features);
  const auto classes = static_cast<Eigen::Index>(spec.classes);
  const bool grouped =
      het.kind == HeterogeneityKind::FeatureRotationGroups || het.kind == HeterogeneityKind::ConceptShift;
  const std::size_t groups = grouped ? het.groups : 1;

  std::mt19937_64 master(het.seed);
  const Matrix class_means = gaussian_matrix(classes, p, spec.class_separation, master);
  // One true weight vector per group; only concept-shift uses more than the first.
  const Matrix true_weights = gaussian_matrix(static_cast<Eigen::Index>(groups), p, 1.0, master);
  std::vector<std::vector<std::size_t>> label_maps(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    label_maps[g].resize(spec.classes);
    std::iota(label_maps[g].begin(), label_maps[g].end(), std::size_t{0});
    if (het.kind == HeterogeneityKind::ConceptShift && g > 0)
      std::shuffle(label_maps[g].begin(), label_maps[g].end(), master);
  }

  const auto sizes = client_sizes(spec);
  Federation fed;
  fed.clients.reserve(spec.clients);
  for (std::size_t i = 0; i < spec.clients; ++i) {
    auto rng = client_rng(het.seed, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(sizes[i]);
    const std::size_t g = grouped ? group_of(i, spec.clients, groups) : 0;

    // Labels: balanced over the client's class set, then shuffled.
    std::vector<std::size_t> allowed(spec.classes);
    std::iota(allowed.begin(), allowed.end(), std::size_t{0});
    if (het.kind == HeterogeneityKind::LabelSkew) {
      const auto k = het.classes_per_client == 0 ? (spec.classes + 1) / 2 : het.classes_per_client;
      std::shuffle(allowed.begin(), allowed.end(), rng);
      allowed.resize(k);
      std::sort(allowed.begin(), allowed.end());
    }
    std::vector<std::size_t> latent(sizes[i]);
    for (std::size_t s = 0; s < sizes[i]; ++s) latent[s] = allowed[s % allowed.size()];
    std::shuffle(latent.begin(), latent.end(), rng);

    Matrix x(n, p);
    Vector y(n);
    for (Eigen::Index s = 0; s < n; ++s) {
      if (spec.task == TaskKind::Multinomial) {
        const auto c = latent[static_cast<std::size_t>(s)];
        for (Eigen::Index f = 0; f < p; ++f) x(s, f) = class_means(static_cast<Eigen::Index>(c), f) + spec.noise * normal(rng);
        y[s] = static_cast<double>(label_maps[g][c]);
      } else {
        for (Eigen::Index f = 0; f < p; ++f) x(s, f) = normal(rng);
        const auto w = true_weights.row(het.kind == HeterogeneityKind::ConceptShift ? static_cast<Eigen::Index>(g) : 0);
        y[s] = x.row(s).dot(w) + spec.noise * normal(rng);
      }
    }
    if (het.kind == HeterogeneityKind::FeatureRotationGroups && g > 0) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(g) / static_cast<double>(groups);
      const auto a = static_cast<Eigen::Index>(het.rotation_axes[0]);
      const auto b = static_cast<Eigen::Index>(het.rotation_axes[1]);
      const double c = std::cos(angle), s = std::sin(angle);
      for (Eigen::Index r = 0; r < n; ++r) {
        const double u = x(r, a), v = x(r, b);
        x(r, a) = c * u - s * v;
        x(r, b) = s * u + c * v;
      }
    }

    ClientData client;
    client.kind = spec.task;
    const auto observed = spec.feature_dims.empty() ? p : static_cast<Eigen::Index>(spec.feature_dims[i]);
    client.features = x.leftCols(observed);
    client.targets = std::move(y);
    client.num_classes = spec.task == TaskKind::Multinomial ? spec.classes : 0;
    client.l2 = spec.l2;
    client.group = g;
    fed.clients.push_back(std::move(client));
  }
  fed.validate();
  return fed;
}

}  // namespace sheaf_fmtl

#include "sheaf_fmtl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sheaf_fmtl {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_theta(const ClientData& client, const Vector& theta) {
  if (static_cast<std::size_t>(theta.size()) != client.model_dim())
    throw std::invalid_argument("model vector has length " + std::to_string(theta.size()) + ", client expects " +
                                std::to_string(client.model_dim()));
}

Eigen::Map<const RowMajorMatrix> weights(const ClientData& client, const Vector& theta) {
  return {theta.data(), static_cast<Eigen::Index>(client.num_classes), client.features.cols()};
}

// Row-wise log-sum-exp with max shift.
Vector log_partition(const Matrix& scores) {
  Vector out(scores.rows());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    out[r] = m + std::log((scores.row(r).array() - m).exp().sum());
  }
  return out;
}

template <class Rows>
Vector grad_over(const ClientData& client, const Vector& theta, const Rows& rows, std::size_t count) {
  check_theta(client, theta);
  Vector grad = client.l2 * theta;
  if (client.kind == TaskKind::Null || count == 0) return grad;
  const double inv_n = 1.0 / static_cast<double>(count);
  if (client.kind == TaskKind::Regression) {
    for (std::size_t k = 0; k < count; ++k) {
      const auto r = static_cast<Eigen::Index>(rows(k));
      const double residual = client.features.row(r).dot(theta) - client.targets[r];
      grad.noalias() += (inv_n * residual) * client.features.row(r).transpose();
    }
    return grad;
  }
  const auto w = weights(client, theta);
  const auto p = client.features.cols();
  const auto classes = static_cast<Eigen::Index>(client.num_classes);
  Eigen::Map<RowMajorMatrix> g(grad.data(), classes, p);
  for (std::size_t k = 0; k < count; ++k) {
    const auto r = static_cast<Eigen::Index>(rows(k));
    Vector s = w * client.features.row(r).transpose();
    const double m = s.maxCoeff();
    s = (s.array() - m).exp();
    s /= s.sum();
    s[client.label(static_cast<std::size_t>(r))] -= 1.0;
    g.noalias() += inv_n * s * client.features.row(r);
  }
  return grad;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Regression: return "regression";
    case TaskKind::Multinomial: return "multinomial";
    case TaskKind::Null: return "null";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "regression" || name == "linear-regression") return TaskKind::Regression;
  if (name == "multinomial" || name == "logistic" || name == "classification") return TaskKind::Multinomial;
  throw std::invalid_argument("unknown task kind '" + std::string(name) + "'");
}

std::size_t ClientData::model_dim() const {
  switch (kind) {
    case TaskKind::Regression: return n_features();
    case TaskKind::Multinomial: return num_classes * n_features();
    case TaskKind::Null: return null_dim;
  }
  return 0;
}

void ClientData::validate() const {
  if (kind == TaskKind::Null) {
    if (null_dim == 0) throw std::invalid_argument("data-free client needs a positive model dimension");
    return;
  }
  if (n_samples() == 0) throw std::invalid_argument("client has no samples");
  if (n_features() == 0) throw std::invalid_argument("client has no features");
  if (static_cast<std::size_t>(targets.size()) != n_samples())
    throw std::invalid_argument("client has " + std::to_string(n_samples()) + " rows but " +
                                std::to_string(targets.size()) + " targets");
  if (!features.allFinite()) throw std::invalid_argument("client features contain NaN or infinite values");
  if (!targets.allFinite()) throw std::invalid_argument("client targets contain NaN or infinite values");
  if (!(l2 >= 0.0)) throw std::invalid_argument("L2 coefficient must be non-negative");
  if (kind == TaskKind::Multinomial) {
    if (num_classes < 2) throw std::invalid_argument("multinomial client needs at least 2 classes");
    for (Eigen::Index r = 0; r < targets.size(); ++r) {
      const double y = targets[r];
      if (y != std::floor(y) || y < 0 || y >= static_cast<double>(num_classes))
        throw std::invalid_argument("label " + std::to_string(y) + " at row " + std::to_string(r) +
                                    " is outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

ClientData ClientData::subset(std::span<const std::size_t> rows) const {
  ClientData out = *this;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(rows[k]));
    out.targets[static_cast<Eigen::Index>(k)] = targets[static_cast<Eigen::Index>(rows[k])];
  }
  return out;
}

std::vector<std::size_t> Federation::model_dims() const {
  std::vector<std::size_t> dims;
  dims.reserve(clients.size());
  for (const auto& c : clients) dims.push_back(c.model_dim());
  return dims;
}

std::vector<std::size_t> Federation::groups() const {
  std::vector<std::size_t> out;
  out.reserve(clients.size());
  for (const auto& c : clients) out.push_back(c.group);
  return out;
}

void Federation::validate() const {
  if (clients.empty()) throw std::invalid_argument("federation has no clients");
  for (std::size_t i = 0; i < clients.size(); ++i) {
    try {
      clients[i].validate();
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument("client " + std::to_string(i) + ": " + err.what());
    }
  }
}

double loss_eval(const ClientData& client, const Vector& theta) {
  check_theta(client, theta);
  const double reg = 0.5 * client.l2 * theta.squaredNorm();
  if (client.kind == TaskKind::Null || client.n_samples() == 0) return reg;
  const double n = static_cast<double>(client.n_samples());
  if (client.kind == TaskKind::Regression) {
    const Vector residual = client.features * theta - client.targets;
    return 0.5 * residual.squaredNorm() / n + reg;
  }
  const Matrix scores = client.features * weights(client, theta).transpose();
  const Vector lse = log_partition(scores);
  double total = 0.0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) total += lse[r] - scores(r, client.label(static_cast<std::size_t>(r)));
  return total / n + reg;
}

Vector loss_grad(const ClientData& client, const Vector& theta) {
  return grad_over(client, theta, [](std::size_t k) { return k; }, client.n_samples());
}

Vector loss_grad_rows(const ClientData& client, const Vector& theta, std::span<const std::size_t> rows) {
  for (auto r : rows)
    if (r >= client.n_samples()) throw std::out_of_range("mini-batch row " + std::to_string(r) + " out of range");
  return grad_over(client, theta, [&](std::size_t k) { return rows[k]; }, rows.size());
}

double smoothness_bound(const ClientData& client) {
  if (client.kind == TaskKind::Null || client.n_samples() == 0) return client.l2;
  const Matrix gram = client.features.transpose() * client.features / static_cast<double>(client.n_samples());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double top = std::max(0.0, eig.eigenvalues().maxCoeff());
  return (client.kind == TaskKind::Multinomial ? 0.5 * top : top) + client.l2;
}

double smoothness_bound(const Federation& federation) {
  double best = 0.0;
  for (const auto& c : federation.clients) best = std::max(best, smoothness_bound(c));
  return best;
}

Matrix predict_scores(const ClientData& client, const Vector& theta) {
  check_theta(client, theta);
  if (client.kind == TaskKind::Regression) return client.features * theta;
  if (client.kind == TaskKind::Multinomial) return client.features * weights(client, theta).transpose();
  return Matrix(0, 0);
}

}  // namespace sheaf_fmtl

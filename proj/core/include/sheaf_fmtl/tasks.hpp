#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sheaf_fmtl/sheaf.hpp"

namespace sheaf_fmtl {

/// Loss model of one client. `Null` is a data-free vertex (f == 0), used for the
/// server node of the star-shaped special cases.
enum class TaskKind { Regression, Multinomial, Null };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

/// One client's local dataset and loss.
///
/// Regression: f(theta) = 1/(2n) sum (x^T theta - y)^2 + l2/2 ||theta||^2, d = p.
/// Multinomial: f(theta) = 1/n sum -log softmax(W x)_y + l2/2 ||theta||^2 with
/// W (C x p) stored class-major, row-major in theta, so d = C * p.
struct ClientData {
  TaskKind kind = TaskKind::Regression;
  Matrix features;         // n x p
  Vector targets;          // real targets, or class labels stored as doubles
  std::size_t num_classes = 0;
  double l2 = 0.0;
  std::size_t group = 0;   // generator group label; informational
  std::size_t null_dim = 0;

  std::size_t n_samples() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t n_features() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t model_dim() const;
  int label(std::size_t row) const { return static_cast<int>(targets[static_cast<Eigen::Index>(row)]); }

  /// Throws std::invalid_argument on empty data, NaN features or bad labels.
  void validate() const;
  /// Copy holding only `rows`, in the given order.
  ClientData subset(std::span<const std::size_t> rows) const;
};

struct Federation {
  std::vector<ClientData> clients;

  std::size_t size() const { return clients.size(); }
  std::vector<std::size_t> model_dims() const;
  std::vector<std::size_t> groups() const;
  void validate() const;
};

double loss_eval(const ClientData& client, const Vector& theta);
Vector loss_grad(const ClientData& client, const Vector& theta);
/// Gradient of the mean loss over `rows` only, plus the full L2 term.
Vector loss_grad_rows(const ClientData& client, const Vector& theta, std::span<const std::size_t> rows);

/// Upper bound on the Lipschitz constant of loss_grad:
/// lambda_max(X^T X / n) (+ l2) for regression, half of that for multinomial.
double smoothness_bound(const ClientData& client);
/// Largest per-client bound.
double smoothness_bound(const Federation& federation);

/// Class scores W x (multinomial) or predictions x^T theta (regression), one row per sample.
Matrix predict_scores(const ClientData& client, const Vector& theta);

}  // namespace sheaf_fmtl

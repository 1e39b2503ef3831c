#include "sheaf_fmtl/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sheaf_fmtl {

EvalResult evaluate(const Federation& test, const Section& theta) {
  if (theta.n_blocks() != test.size()) throw std::invalid_argument("section and federation differ in client count");
  EvalResult out;
  out.per_client.assign(test.size(), std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  std::size_t counted = 0;
  bool any_regression = false;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& client = test.clients[i];
    if (client.kind == TaskKind::Null) continue;
    if (client.n_samples() == 0) throw std::invalid_argument("client " + std::to_string(i) + " has an empty test set");
    const Matrix scores = predict_scores(client, theta[i]);
    double metric = 0.0;
    if (client.kind == TaskKind::Regression) {
      any_regression = true;
      metric = (scores.col(0) - client.targets).squaredNorm() / static_cast<double>(client.n_samples());
    } else {
      std::size_t correct = 0;
      for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c)
          if (scores(r, c) > scores(r, best)) best = c;
        if (best == client.label(static_cast<std::size_t>(r))) ++correct;
      }
      metric = static_cast<double>(correct) / static_cast<double>(client.n_samples());
    }
    out.per_client[i] = metric;
    sum += metric;
    ++counted;
  }
  out.is_accuracy = !any_regression;
  out.mean = counted > 0 ? sum / static_cast<double>(counted) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

double percentile(std::vector<double> values, double q) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace sheaf_fmtl

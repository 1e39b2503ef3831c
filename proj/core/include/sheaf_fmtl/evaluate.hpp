#pragma once

#include <vector>

#include "sheaf_fmtl/sheaf.hpp"
#include "sheaf_fmtl/tasks.hpp"

namespace sheaf_fmtl {

/// Accuracy for classification (argmax, ties to the lowest class index) or mean
/// squared error for regression. Data-free clients are skipped in the aggregate.
struct EvalResult {
  std::vector<double> per_client;  // NaN for data-free clients
  double mean = 0.0;               // unweighted over data-bearing clients
  bool is_accuracy = true;
};

EvalResult evaluate(const Federation& test, const Section& theta);

/// Linear-interpolated percentile (q in [0, 100]) over the finite entries.
double percentile(std::vector<double> values, double q);

}  // namespace sheaf_fmtl

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sheaf_fmtl/tasks.hpp"

namespace sheaf_fmtl {

enum class HeterogeneityKind { FeatureRotationGroups, LabelSkew, ConceptShift, QuantitySkew, Iid };

std::string_view to_string(HeterogeneityKind kind);
HeterogeneityKind parse_heterogeneity_kind(std::string_view name);

struct HeterogeneitySpec {
  HeterogeneityKind kind = HeterogeneityKind::Iid;
  std::size_t groups = 1;              // rotation / concept-shift groups
  std::size_t classes_per_client = 0;  // label skew; 0 means ceil(C / 2)
  double imbalance_ratio = 1.0;        // quantity skew: largest / smallest client size
  std::size_t rotation_axes[2] = {0, 1};
  std::uint64_t seed = 0;
};

/// Synthetic federation recipe. `samples` is the total across clients.
struct SynthSpec {
  HeterogeneitySpec heterogeneity;
  TaskKind task = TaskKind::Multinomial;
  std::size_t clients = 10;
  std::size_t features = 10;
  /// Optional per-client observed feature counts; client i sees the first
  /// feature_dims[i] coordinates of the generated sample.
  std::vector<std::size_t> feature_dims;
  std::size_t classes = 2;
  std::size_t samples = 1000;
  double l2 = 1e-3;
  double noise = 1.0;             // feature noise (classification) or target noise (regression)
  double class_separation = 1.0;  // scale of the class means

  void validate() const;
};

/// Deterministic given heterogeneity.seed.
///
/// feature-rotation-groups: clients are split into `groups` contiguous blocks and
///   block g has its features rotated by 2*pi*g/G in the (axes[0], axes[1]) plane.
/// label-skew: every client holds exactly classes_per_client distinct classes.
/// concept-shift: groups share features but permute labels (classification) or
///   draw independent true weights (regression).
/// quantity-skew: client sizes decay geometrically so that max/min = imbalance_ratio.
Federation synth_federation(const SynthSpec& spec);

/// CSV ingestion. Every file has a header row. Columns other than the target and
/// the optional client-id column are numeric features. Without a client column
/// each file is one client; with it, rows are grouped by id in order of first
/// appearance within each file.
struct CsvSource {
  std::vector<std::filesystem::path> files;
  std::string target_column = "target";
  std::optional<std::string> client_column;
  TaskKind task = TaskKind::Regression;
  std::size_t num_classes = 0;  // 0 infers max label + 1 across all files
  double l2 = 1e-3;
};

Federation load_csv_federation(const CsvSource& source);

/// Writes one client as CSV with columns target, x0..x{p-1}, readable back
/// through load_csv_federation (one file per client).
void write_client_csv(const std::filesystem::path& path, const ClientData& client);

struct SplitSpec {
  double train_fraction = 0.75;
  double reduced_fraction = 0.5;   // share of clients whose train set is cut down
  double reduction_ratio = 0.8;    // share of train samples those clients drop
  std::uint64_t seed = 0;
  bool standardize = false;        // per-client z-score from train statistics

  void validate() const;
};

struct SplitResult {
  Federation train;
  Federation test;
  std::vector<bool> reduced;
  std::vector<std::size_t> train_before_reduction;
};

/// Per-client train/test split, then a seeded subset of clients keeps only
/// max(1, floor(n_train * (1 - reduction_ratio))) train samples. Stratified by
/// class when every class of a multinomial client has at least 4 samples.
SplitResult apply_split(const Federation& federation, const SplitSpec& spec);

}  // namespace sheaf_fmtl

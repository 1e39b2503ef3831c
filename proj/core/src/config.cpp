#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "sheaf_fmtl/experiment.hpp"

namespace sheaf_fmtl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw std::invalid_argument(path + ": " + message);
}

// Object view that remembers which keys were read, so leftovers can be
// reported as typos.
class Section_ {
 public:
  Section_(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string at(std::string_view key) const { return path_ + "." + std::string(key); }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return convert<T>(node_.at(key), at(key));
  }

  template <class T>
  std::optional<T> optional(const std::string& key) {
    if (!has(key) || node_.at(key).is_null()) return std::nullopt;
    return convert<T>(node_.at(key), at(key));
  }

  Section_ child(const std::string& key) {
    seen_.insert(key);
    return Section_(node_.at(key), at(key));
  }

  void finish() const {
    for (const auto& [key, value] : node_.items())
      if (!seen_.contains(key)) fail(at(key), "unknown key");
  }

  template <class T>
  static T convert(const json& value, const std::string& path) {
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t> ||
                    std::is_same_v<T, unsigned>) {
        if (!value.is_number_integer() || value.get<std::int64_t>() < 0) fail(path, "expected a non-negative integer");
        return static_cast<T>(value.get<std::uint64_t>());
      } else if constexpr (std::is_same_v<T, double>) {
        if (!value.is_number()) fail(path, "expected a number");
        return value.get<double>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!value.is_boolean()) fail(path, "expected true or false");
        return value.get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!value.is_string()) fail(path, "expected a string");
        return value.get<std::string>();
      } else {
        return value.get<T>();
      }
    } catch (const json::exception& err) {
      fail(path, err.what());
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Fn>
auto guarded(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::invalid_argument& err) {
    const std::string what = err.what();
    if (what.rfind("config", 0) == 0) throw;
    fail(path, what);
  }
}

std::vector<std::size_t> size_list(const json& node, const std::string& path) {
  if (!node.is_array()) fail(path, "expected an array");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < node.size(); ++i)
    out.push_back(Section_::convert<std::size_t>(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<double> number_list(const json& node, const std::string& path) {
  if (!node.is_array()) fail(path, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i)
    out.push_back(Section_::convert<double>(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void read_topology(Section_& s, TopologySpec& spec) {
  if (s.has("kind"))
    spec.kind = guarded(s.at("kind"), [&] { return parse_topology_kind(s.get<std::string>("kind", "")); });
  spec.edge_probability = s.get<double>("p", spec.edge_probability);
  spec.ring_neighbors = s.get<std::size_t>("k", spec.ring_neighbors);
  spec.rewire_probability = s.get<double>("rewire", spec.rewire_probability);
  spec.attachments = s.get<std::size_t>("m", spec.attachments);
  spec.max_resamples = s.get<std::size_t>("max_resamples", spec.max_resamples);
}

SynthSpec read_synthetic(Section_ s) {
  SynthSpec spec;
  if (s.has("task")) spec.task = guarded(s.at("task"), [&] { return parse_task_kind(s.get<std::string>("task", "")); });
  spec.clients = s.get<std::size_t>("clients", spec.clients);
  spec.features = s.get<std::size_t>("features", spec.features);
  if (s.has("feature_dims")) spec.feature_dims = size_list(s.raw("feature_dims"), s.at("feature_dims"));
  spec.classes = s.get<std::size_t>("classes", spec.classes);
  spec.samples = s.get<std::size_t>("samples", spec.samples);
  spec.l2 = s.get<double>("l2", spec.l2);
  spec.noise = s.get<double>("noise", spec.noise);
  spec.class_separation = s.get<double>("separation", spec.class_separation);
  if (s.has("heterogeneity")) {
    auto h = s.child("heterogeneity");
    auto& het = spec.heterogeneity;
    if (h.has("kind"))
      het.kind = guarded(h.at("kind"), [&] { return parse_heterogeneity_kind(h.get<std::string>("kind", "")); });
    het.groups = h.get<std::size_t>("groups", het.groups);
    het.classes_per_client = h.get<std::size_t>("classes_per_client", het.classes_per_client);
    het.imbalance_ratio = h.get<double>("imbalance_ratio", het.imbalance_ratio);
    if (h.has("rotation_axes")) {
      const auto axes = size_list(h.raw("rotation_axes"), h.at("rotation_axes"));
      if (axes.size() != 2) fail(h.at("rotation_axes"), "expected two axis indices");
      het.rotation_axes[0] = axes[0];
      het.rotation_axes[1] = axes[1];
    }
    h.finish();
  }
  s.finish();
  return spec;
}

CsvSource read_csv(Section_ s, const std::filesystem::path& base_dir) {
  CsvSource src;
  if (!s.has("files")) fail(s.at("files"), "required");
  const auto& files = s.raw("files");
  if (!files.is_array() || files.empty()) fail(s.at("files"), "expected a non-empty array of paths");
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::filesystem::path p = Section_::convert<std::string>(files[i], s.at("files") + "[" + std::to_string(i) + "]");
    src.files.push_back(p.is_relative() ? base_dir / p : p);
  }
  src.target_column = s.get<std::string>("target_column", src.target_column);
  src.client_column = s.optional<std::string>("client_column");
  if (s.has("task")) src.task = guarded(s.at("task"), [&] { return parse_task_kind(s.get<std::string>("task", "")); });
  src.num_classes = s.get<std::size_t>("num_classes", src.num_classes);
  src.l2 = s.get<double>("l2", src.l2);
  s.finish();
  return src;
}

void read_trainer(Section_& s, TrainerConfig& t) {
  t.lambda = s.get<double>("lambda", t.lambda);
  t.alpha = s.get<double>("alpha", t.alpha);
  t.eta = s.get<double>("eta", t.eta);
  t.rounds = s.get<std::size_t>("rounds", t.rounds);
  t.batch_size = s.get<std::size_t>("batch_size", t.batch_size);
  if (auto v = s.optional<double>("smoothness")) t.smoothness = v;
  if (auto v = s.optional<double>("domain_bound")) t.domain_bound = v;
  t.freeze_maps = s.get<bool>("freeze_maps", t.freeze_maps);
  t.monitor_descent = s.get<bool>("monitor_descent", t.monitor_descent);
  t.threads = s.get<std::size_t>("threads", t.threads);
  t.keep_messages = s.get<bool>("keep_messages", t.keep_messages);
  if (s.has("init")) {
    auto i = s.child("init");
    if (i.has("kind"))
      t.init.kind = guarded(i.at("kind"), [&] { return parse_init_kind(i.get<std::string>("kind", "")); });
    t.init.scale = i.get<double>("scale", t.init.scale);
    i.finish();
  }
}

}  // namespace

namespace {

ExperimentConfig parse_with_base(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& err) {
    fail("config", std::string("not valid JSON: ") + err.what());
  }
  ExperimentConfig cfg;
  Section_ root(doc, "config");
  cfg.run_id = root.get<std::string>("run_id", cfg.run_id);
  cfg.seed = root.get<std::uint64_t>("seed", cfg.seed);
  cfg.repeats = root.get<std::size_t>("repeats", cfg.repeats);
  cfg.output_dir = root.get<std::string>("output_dir", cfg.output_dir.string());
  cfg.gamma = root.get<double>("gamma", cfg.gamma);
  cfg.eval_every = root.get<std::size_t>("eval_every", cfg.eval_every);
  cfg.scalar_bits = root.get<unsigned>("scalar_bits", cfg.scalar_bits);
  cfg.write_ledgers = root.get<bool>("write_ledgers", cfg.write_ledgers);
  cfg.write_heatmaps = root.get<bool>("write_heatmaps", cfg.write_heatmaps);
  if (root.has("bits_convention"))
    cfg.convention = guarded(root.at("bits_convention"),
                             [&] { return parse_bits_convention(root.get<std::string>("bits_convention", "")); });

  if (root.has("topology")) {
    auto t = root.child("topology");
    read_topology(t, cfg.topology);
    t.finish();
  }
  if (!root.has("data")) fail(root.at("data"), "required");
  {
    auto d = root.child("data");
    if (d.has("synthetic")) cfg.data.synthetic = read_synthetic(d.child("synthetic"));
    if (d.has("csv")) cfg.data.csv = read_csv(d.child("csv"), base_dir);
    d.finish();
  }
  if (root.has("split")) {
    auto s = root.child("split");
    cfg.split.train_fraction = s.get<double>("train_fraction", cfg.split.train_fraction);
    cfg.split.reduced_fraction = s.get<double>("reduced_fraction", cfg.split.reduced_fraction);
    cfg.split.reduction_ratio = s.get<double>("reduction_ratio", cfg.split.reduction_ratio);
    cfg.split.standardize = s.get<bool>("standardize", cfg.split.standardize);
    s.finish();
  }

  TrainerConfig defaults;
  if (root.has("trainer")) {
    auto t = root.child("trainer");
    read_trainer(t, defaults);
    t.finish();
  }
  if (!root.has("algorithms")) fail(root.at("algorithms"), "required");
  const auto& algs = root.raw("algorithms");
  if (!algs.is_array()) fail(root.at("algorithms"), "expected an array");
  for (std::size_t i = 0; i < algs.size(); ++i) {
    const std::string path = root.at("algorithms") + "[" + std::to_string(i) + "]";
    AlgorithmRun run;
    run.trainer = defaults;
    if (algs[i].is_string()) {
      run.trainer.algorithm = guarded(path, [&] { return parse_algorithm(algs[i].get<std::string>()); });
    } else {
      Section_ a(algs[i], path);
      if (!a.has("name")) fail(a.at("name"), "required");
      run.trainer.algorithm = guarded(a.at("name"), [&] { return parse_algorithm(a.get<std::string>("name", "")); });
      run.label = a.get<std::string>("label", "");
      run.gamma = a.optional<double>("gamma");
      read_trainer(a, run.trainer);
      a.finish();
    }
    if (run.label.empty()) run.label = std::string(to_string(run.trainer.algorithm));
    cfg.algorithms.push_back(std::move(run));
  }

  if (root.has("ablation")) {
    auto a = root.child("ablation");
    AblationSpec ab;
    if (!a.has("topologies")) fail(a.at("topologies"), "required");
    const auto& topos = a.raw("topologies");
    if (!topos.is_array()) fail(a.at("topologies"), "expected an array");
    for (std::size_t i = 0; i < topos.size(); ++i) {
      Section_ t(topos[i], a.at("topologies") + "[" + std::to_string(i) + "]");
      AblationTopology entry;
      entry.spec = cfg.topology;
      read_topology(t, entry.spec);
      entry.label = t.get<std::string>("label", std::string(to_string(entry.spec.kind)));
      t.finish();
      ab.topologies.push_back(std::move(entry));
    }
    if (!a.has("lambdas")) fail(a.at("lambdas"), "required");
    ab.lambdas = number_list(a.raw("lambdas"), a.at("lambdas"));
    if (a.has("labels")) {
      const auto& labels = a.raw("labels");
      if (!labels.is_array()) fail(a.at("labels"), "expected an array");
      for (std::size_t i = 0; i < labels.size(); ++i)
        ab.labels.push_back(Section_::convert<std::string>(labels[i], a.at("labels") + "[" + std::to_string(i) + "]"));
    }
    ab.repeats = a.get<std::size_t>("repeats", ab.repeats);
    a.finish();
    cfg.ablation = std::move(ab);
  }
  root.finish();

  cfg.validate();
  return cfg;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  return parse_with_base(json_text, std::filesystem::current_path());
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_with_base(buffer.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

void ExperimentConfig::validate() const {
  if (run_id.empty()) fail("config.run_id", "must not be empty");
  for (char c : run_id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
      fail("config.run_id", "may only contain letters, digits, '-', '_' and '.'");
  if (repeats == 0) fail("config.repeats", "must be >= 1");
  if (eval_every == 0) fail("config.eval_every", "must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("config.gamma", "must lie in (0, 1]");
  if (scalar_bits != 32 && scalar_bits != 64) fail("config.scalar_bits", "must be 32 or 64");
  if (data.synthetic.has_value() == data.csv.has_value())
    fail("config.data", "set exactly one of \"synthetic\" or \"csv\"");
  if (data.synthetic) guarded("config.data.synthetic", [&] { data.synthetic->validate(); });
  guarded("config.split", [&] { split.validate(); });
  if (algorithms.empty()) fail("config.algorithms", "at least one algorithm is required");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < algorithms.size(); ++i) {
    const std::string path = "config.algorithms[" + std::to_string(i) + "]";
    const auto& run = algorithms[i];
    if (!labels.insert(run.label).second) fail(path + ".label", "duplicate label '" + run.label + "'");
    if (run.gamma && !(*run.gamma > 0.0 && *run.gamma <= 1.0)) fail(path + ".gamma", "must lie in (0, 1]");
    guarded(path, [&] { run.trainer.validate(); });
  }
  if (ablation) {
    if (ablation->topologies.empty()) fail("config.ablation.topologies", "must not be empty");
    if (ablation->lambdas.empty()) fail("config.ablation.lambdas", "must not be empty");
    for (std::size_t i = 0; i < ablation->lambdas.size(); ++i)
      if (!(ablation->lambdas[i] >= 0.0)) fail("config.ablation.lambdas[" + std::to_string(i) + "]", "must be >= 0");
    for (const auto& label : ablation->labels)
      if (!labels.contains(label)) fail("config.ablation.labels", "no algorithm labelled '" + label + "'");
  }
}

}  // namespace sheaf_fmtl

#include "sheaf_fmtl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

#include <fmt/format.h>

namespace sheaf_fmtl {

namespace {

// Runs fn(i) for i in [0, n). Each index writes only its own output slot, so the
// result is identical for any thread count.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < n; i += threads) fn(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

bool all_zero(const RestrictionMaps& maps) {
  for (std::size_t e = 0; e < maps.n_edges(); ++e)
    if (!maps.lower(e).isZero(0.0) || !maps.upper(e).isZero(0.0)) return false;
  return true;
}

std::vector<std::size_t> batch_rows(const ClientData& client, std::size_t batch, std::uint64_t seed,
                                    std::size_t round, std::size_t index) {
  std::vector<std::size_t> rows(client.n_samples());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (batch == 0 || batch >= rows.size()) return rows;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(round), static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  for (std::size_t k = 0; k < batch; ++k) {
    const auto j = std::uniform_int_distribution<std::size_t>(k, rows.size() - 1)(rng);
    std::swap(rows[k], rows[j]);
  }
  rows.resize(batch);
  std::sort(rows.begin(), rows.end());
  return rows;
}

double psi_of(const SheafGraph& sheaf, const Federation& fed, const Section& theta, const RestrictionMaps& maps,
              double lambda) {
  return objective_psi(sheaf, fed, theta, maps, lambda);
}

}  // namespace

void TrainerConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite and > 0");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be finite and >= 0");
  if (rounds == 0) throw std::invalid_argument("rounds must be >= 1");
  if (eval_every == 0) throw std::invalid_argument("evaluation cadence must be >= 1");
  if (smoothness && !(*smoothness > 0.0)) throw std::invalid_argument("smoothness override must be positive");
  if (domain_bound && !(*domain_bound > 0.0)) throw std::invalid_argument("domain bound override must be positive");
  if (scalar_bits != 32 && scalar_bits != 64) throw std::invalid_argument("scalar width must be 32 or 64 bits");
  init.validate();
  if (algorithm == Algorithm::SheafFmtl && init.kind == InitKind::Zero && !allow_zero_init)
    throw std::invalid_argument(
        "all-zero restriction maps receive a zero map gradient forever, so interactions are never learned "
        "and sheaf-fmtl collapses to independent local training; use a non-zero initialisation");
}

Matrix metropolis_hastings_weights(const Graph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.n_vertices());
  Matrix w = Matrix::Zero(n, n);
  for (const auto& e : graph.edges()) {
    const double v = 1.0 / (1.0 + static_cast<double>(std::max(graph.degree(e.lo), graph.degree(e.hi))));
    w(static_cast<Eigen::Index>(e.lo), static_cast<Eigen::Index>(e.hi)) = v;
    w(static_cast<Eigen::Index>(e.hi), static_cast<Eigen::Index>(e.lo)) = v;
  }
  for (Eigen::Index i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

double laplacian_norm_estimate(const SheafGraph& sheaf, const RestrictionMaps& maps, std::size_t iterations) {
  std::vector<Vector> blocks;
  for (std::size_t i = 0; i < sheaf.n_vertices(); ++i) {
    Vector b(static_cast<Eigen::Index>(sheaf.stalk_dim(i)));
    for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = 1.0 + 0.1 * std::sin(static_cast<double>(i * 31 + static_cast<std::size_t>(k)));
    blocks.push_back(std::move(b));
  }
  Section v(std::move(blocks));
  double estimate = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const double norm = std::sqrt(v.squared_norm());
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < v.n_blocks(); ++i) v[i] /= norm;
    Section lv = laplacian_apply(sheaf, maps, v);
    double dot = 0.0;
    for (std::size_t i = 0; i < v.n_blocks(); ++i) dot += v[i].dot(lv[i]);
    estimate = dot;
    v = std::move(lv);
  }
  return estimate;
}

TrainingResult run_training(const SheafGraph& sheaf, const Federation& train, const TrainerConfig& config,
                            const Federation* test) {
  TrainingInputs inputs;
  inputs.sheaf = &sheaf;
  inputs.train = &train;
  inputs.test = test;
  return run_training(inputs, config);
}

TrainingResult run_training(const TrainingInputs& inputs, const TrainerConfig& config) {
  if (inputs.sheaf == nullptr || inputs.train == nullptr) throw std::invalid_argument("training needs a sheaf and data");
  config.validate();
  const SheafGraph& base = *inputs.sheaf;
  const Federation& fed = *inputs.train;
  check_federation(base, fed);
  if (inputs.test != nullptr && inputs.test->size() != fed.size())
    throw std::invalid_argument("test federation has a different client count");

  const Algorithm algorithm = config.algorithm;
  const std::size_t n = base.n_vertices();
  const auto dims = base.stalk_dims();

  TrainingResult result;
  result.algorithm = algorithm;
  result.sheaf = base;
  RestrictionMaps maps;
  bool frozen = config.freeze_maps;
  double lambda = config.lambda;
  Matrix mixing;

  switch (algorithm) {
    case Algorithm::SheafFmtl:
      maps = inputs.initial_maps != nullptr ? *inputs.initial_maps : init_maps(config.init, base);
      maps.validate(base);
      if (all_zero(maps) && !config.allow_zero_init)
        throw std::invalid_argument(
            "all-zero restriction maps receive a zero map gradient forever, so interactions are never learned "
            "and sheaf-fmtl collapses to independent local training; use a non-zero initialisation");
      break;
    case Algorithm::DFedU: {
      SpecialCase constant{SpecialCaseKind::ConventionalFl, {}, {}, 0};
      auto special = special_case_sheaf(constant, base.graph(), dims);
      result.sheaf = std::move(special.sheaf);
      maps = std::move(special.maps);
      frozen = true;
      break;
    }
    case Algorithm::Local:
      maps = RestrictionMaps::zeros(base);
      lambda = 0.0;
      frozen = true;
      break;
    case Algorithm::DPSGD:
      for (auto d : dims)
        if (d != dims.front()) throw std::invalid_argument("dpsgd requires every client to have the same model dimension");
      maps = RestrictionMaps::zeros(base);
      lambda = 0.0;
      frozen = true;
      mixing = metropolis_hastings_weights(base.graph());
      break;
  }
  const SheafGraph& sheaf = result.sheaf;
  const StepParams params{config.alpha, config.eta, lambda};
  const bool full_batch = config.batch_size == 0;
  const bool monitor = config.monitor_descent && full_batch && algorithm != Algorithm::DPSGD;
  const double smoothness = config.smoothness ? *config.smoothness : smoothness_bound(fed);
  const double nl = static_cast<double>(n) * smoothness;

  Section theta = inputs.initial_theta != nullptr ? *inputs.initial_theta : Section::zeros(dims);
  check_section(sheaf, theta);

  result.ledger = CommLedger(n, config.scalar_bits, config.keep_messages);
  MessageBoard board(sheaf.graph());

  double max_theta_norm = std::sqrt(theta.squared_norm());
  double curvature_ratio = 0.0;

  const auto make_record = [&](std::size_t round, const Section& th, const RestrictionMaps& mp) {
    RoundRecord rec;
    rec.round = round;
    rec.psi = psi_of(sheaf, fed, th, mp, lambda);
    rec.grad_theta_sq = grad_theta_psi(sheaf, fed, th, mp, lambda).squared_norm();
    rec.grad_p_sq = frozen ? 0.0 : squared_norm(grad_p_psi(sheaf, th, mp, lambda));
    double loss_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fed.clients[i].kind == TaskKind::Null) continue;
      loss_sum += loss_eval(fed.clients[i], th[i]);
      ++counted;
    }
    rec.train_loss_mean = counted > 0 ? loss_sum / static_cast<double>(counted) : 0.0;
    if (inputs.test != nullptr && (round % config.eval_every == 0 || round == config.rounds))
      rec.test = evaluate(*inputs.test, th);
    rec.cumulative_bits = round == 0 ? 0 : result.ledger.total_bits(round, config.convention);
    for (std::size_t i = 0; i < n; ++i) rec.max_theta_norm = std::max(rec.max_theta_norm, th[i].norm());
    rec.theta_norm = std::sqrt(th.squared_norm());
    rec.max_map_norm = mp.max_frobenius_norm();
    return rec;
  };
  const auto push_record = [&](RoundRecord rec) {
    if (inputs.on_round) inputs.on_round(rec);
    result.history.push_back(std::move(rec));
  };

  push_record(make_record(0, theta, maps));

  std::vector<Vector> grads(n);
  std::vector<Vector> next(n);
  for (std::size_t k = 0; k < config.rounds; ++k) {
    const std::size_t round = k + 1;
    result.ledger.touch(round);

    DescentCheck check;
    check.round = k;
    if (monitor) {
      check.psi_before = result.history.back().psi;
      check.grad_theta_sq = result.history.back().grad_theta_sq;
      if (lambda > 0.0) {
        const double ratio = lambda * laplacian_norm_estimate(sheaf, maps) /
                             (std::max<double>(static_cast<double>(n) - 1.0, 1.0) * smoothness);
        curvature_ratio = std::max(curvature_ratio, ratio);
      }
    }

    if (algorithm == Algorithm::DPSGD) {
      board.clear();
      for (std::size_t i = 0; i < n; ++i)
        for (const auto& inc : sheaf.graph().incidences(i)) board.post(i, inc.edge, theta[i]);
      result.ledger.commit(round, 0, board);
      parallel_for(n, config.threads, [&](std::size_t i) {
        Vector mixed = mixing(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) * theta[i];
        for (const auto& inc : sheaf.graph().incidences(i))
          mixed += mixing(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(inc.neighbor)) *
                   board.receive(i, inc.edge);
        const auto rows = batch_rows(fed.clients[i], config.batch_size, config.seed, round, i);
        const Vector g = full_batch ? loss_grad(fed.clients[i], mixed) : loss_grad_rows(fed.clients[i], mixed, rows);
        next[i] = mixed - config.alpha * g;
      });
    } else {
      parallel_for(n, config.threads, [&](std::size_t i) {
        if (full_batch) {
          grads[i] = loss_grad(fed.clients[i], theta[i]);
        } else {
          const auto rows = batch_rows(fed.clients[i], config.batch_size, config.seed, round, i);
          grads[i] = loss_grad_rows(fed.clients[i], theta[i], rows);
        }
      });
      if (algorithm == Algorithm::Local) {
        for (std::size_t i = 0; i < n; ++i) next[i] = theta[i] - config.alpha * grads[i];
      } else {
        board.clear();
        post_projections(sheaf, maps, theta, board);
        result.ledger.commit(round, 0, board);
        parallel_for(n, config.threads, [&](std::size_t i) {
          next[i] = theta_step_client(i, sheaf, theta, maps, grads[i], board, params);
        });
      }
    }
    Section theta_next{std::vector<Vector>(next)};
    if (!theta_next.all_finite())
      throw std::runtime_error(fmt::format("{} diverged at round {}: model state is no longer finite",
                                           to_string(algorithm), round));
    max_theta_norm = std::max(max_theta_norm, std::sqrt(theta_next.squared_norm()));

    if (monitor) {
      check.psi_half = psi_of(sheaf, fed, theta_next, maps, lambda);
      const double rhs = check.psi_before - config.alpha * (1.0 - config.alpha * nl / 2.0) * check.grad_theta_sq;
      check.theta_slack = rhs + 1e-9 - check.psi_half;
      if (check.theta_slack < 0.0)
        result.warnings.push_back(fmt::format("round {}: model half-step missed the descent bound by {:.3e}", round,
                                              -check.theta_slack));
    }

    RestrictionMaps maps_next = maps;
    if (algorithm == Algorithm::SheafFmtl && !frozen) {
      board.clear();
      post_projections(sheaf, maps, theta_next, board);
      result.ledger.commit(round, 1, board);
      parallel_for(n, config.threads,
                   [&](std::size_t i) { p_step_client(i, sheaf, theta_next, maps, board, params, maps_next); });
      if (!maps_next.all_finite())
        throw std::runtime_error(fmt::format("sheaf-fmtl diverged at round {}: restriction maps are no longer finite",
                                             round));
    }

    if (monitor) {
      check.psi_after = frozen ? check.psi_half : psi_of(sheaf, fed, theta_next, maps_next, lambda);
      check.grad_p_half_sq = frozen ? 0.0 : squared_norm(grad_p_psi(sheaf, theta_next, maps, lambda));
      const double d = config.domain_bound ? *config.domain_bound : max_theta_norm;
      const double rhs = check.psi_half - config.eta * (1.0 - config.eta * lambda * d * d / 2.0) * check.grad_p_half_sq;
      check.p_slack = rhs + 1e-9 - check.psi_after;
      if (check.p_slack < 0.0)
        result.warnings.push_back(fmt::format("round {}: map half-step missed the descent bound by {:.3e}", round,
                                              -check.p_slack));
      result.descent.push_back(check);
    }

    theta = std::move(theta_next);
    maps = std::move(maps_next);
    push_record(make_record(round, theta, maps));
    if (!std::isfinite(result.history.back().psi))
      throw std::runtime_error(fmt::format("{} diverged at round {}: objective is no longer finite",
                                           to_string(algorithm), round));
  }

  // Hindsight check of the step-size conditions.
  auto& h = result.hindsight;
  h.smoothness = smoothness;
  h.domain_monitored = !config.domain_bound.has_value();
  h.domain_bound = config.domain_bound ? *config.domain_bound : std::max(max_theta_norm, 1e-300);
  const auto bounds = step_bounds(n, smoothness, lambda, h.domain_bound);
  h.alpha_max = bounds.alpha_max;
  h.eta_max = bounds.eta_max;
  h.alpha_ok = config.alpha < bounds.alpha_max;
  const bool maps_learned = algorithm == Algorithm::SheafFmtl && !frozen;
  h.eta_ok = !maps_learned || config.eta < bounds.eta_max;
  h.rho = maps_learned ? bounds.rho(config.alpha, config.eta)
                       : config.alpha * (1.0 - config.alpha * nl / 2.0);
  h.psi_initial = result.history.front().psi;
  h.psi_best = h.psi_initial;
  h.min_grad_sq = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < result.history.size(); ++k) {
    const auto& rec = result.history[k];
    h.psi_best = std::min(h.psi_best, rec.psi);
    if (k < config.rounds) h.min_grad_sq = std::min(h.min_grad_sq, rec.grad_theta_sq + rec.grad_p_sq);
  }
  h.rate_bound = h.rho > 0.0 ? (h.psi_initial - h.psi_best) / (h.rho * static_cast<double>(config.rounds))
                             : std::numeric_limits<double>::infinity();
  h.rate_ok = h.rho > 0.0 && h.min_grad_sq <= h.rate_bound;
  h.coupling_curvature_ratio = curvature_ratio;

  result.theta = std::move(theta);
  result.maps = std::move(maps);
  return result;
}

}  // namespace sheaf_fmtl

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sheaf_fmtl/sheaf.hpp"

namespace sheaf_fmtl {

enum class Algorithm { SheafFmtl, DFedU, Local, DPSGD };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

/// Which exchanges count towards reported traffic. `Table3` counts the single
/// projected-vector exchange per round that the cost table lists; `Algorithm1`
/// counts both exchanges the sheaf algorithm actually performs.
enum class BitsConvention { Table3, Algorithm1 };

std::string_view to_string(BitsConvention convention);
BitsConvention parse_bits_convention(std::string_view name);

/// Scalars each client transmits in one round, under both conventions.
struct RoundPayload {
  std::vector<std::size_t> table3;
  std::vector<std::size_t> algorithm1;

  const std::vector<std::size_t>& per_client(BitsConvention convention) const {
    return convention == BitsConvention::Table3 ? table3 : algorithm1;
  }
  std::size_t total(BitsConvention convention) const;
};

/// Closed-form per-round traffic. sheaf-fmtl: sum of d_ij over neighbours (doubled
/// for Algorithm1); dfedu and dpsgd: sum of neighbour model sizes d_j; local: 0.
RoundPayload scalars_per_round(const SheafGraph& sheaf, Algorithm algorithm);

/// One synchronous exchange. Every client posts one vector per incident edge;
/// receives only see what the other endpoint posted in the same phase.
class MessageBoard {
 public:
  explicit MessageBoard(const Graph& graph);

  /// Sender's message on edge `e`, delivered to the opposite endpoint.
  void post(std::size_t sender, std::size_t e, Vector payload);
  /// The vector the neighbour across `e` sent to `receiver`. Throws
  /// std::logic_error if that neighbour has not posted in this phase.
  const Vector& receive(std::size_t receiver, std::size_t e) const;
  bool has(std::size_t sender, std::size_t e) const;
  void clear();

  const Graph& graph() const { return *graph_; }
  /// Scalars sent by each client in the current phase.
  std::vector<std::size_t> sent_scalars() const;

  struct Message {
    std::size_t sender;
    std::size_t receiver;
    std::size_t edge;
    std::size_t length;
  };
  std::vector<Message> messages() const;

 private:
  std::size_t slot(std::size_t vertex, std::size_t e) const;

  const Graph* graph_;
  std::vector<Vector> slots_;  // 2e for the lower endpoint's post, 2e+1 for the upper's
  std::vector<bool> filled_;
};

/// Per-round, per-client transmitted scalars, split by exchange phase.
class CommLedger {
 public:
  CommLedger() = default;
  CommLedger(std::size_t n_clients, unsigned scalar_bits, bool keep_messages = false);

  /// Charges everything on `board` to `round` and `phase` (0 = model-update
  /// exchange, 1 = map-update exchange). Phases are recorded at the barrier.
  void commit(std::size_t round, int phase, const MessageBoard& board);
  /// Opens an empty round so silent rounds (local training) still produce rows.
  void touch(std::size_t round);

  std::size_t n_clients() const { return n_clients_; }
  unsigned scalar_bits() const { return scalar_bits_; }
  std::size_t n_rounds() const { return rounds_.size(); }

  /// Scalars sent by `client` in `round` under `convention`.
  std::size_t scalars(std::size_t round, std::size_t client, BitsConvention convention) const;
  std::uint64_t cumulative_bits(std::size_t through_round, std::size_t client, BitsConvention convention) const;
  /// Sum over clients of cumulative bits through `through_round`.
  std::uint64_t total_bits(std::size_t through_round, BitsConvention convention) const;

  struct LoggedMessage {
    std::size_t round;
    int phase;
    MessageBoard::Message message;
  };
  const std::vector<LoggedMessage>& message_log() const { return log_; }

  /// CSV columns: round, client, scalars, cumulative_bits.
  void write_csv(std::ostream& out, BitsConvention convention) const;

 private:
  using Counts = std::vector<std::array<std::size_t, 2>>;
  const Counts& round_counts(std::size_t round) const;

  std::size_t n_clients_ = 0;
  unsigned scalar_bits_ = 32;
  bool keep_messages_ = false;
  std::map<std::size_t, Counts> rounds_;
  std::vector<LoggedMessage> log_;
};

}  // namespace sheaf_fmtl

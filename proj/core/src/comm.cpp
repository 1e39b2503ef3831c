#include "sheaf_fmtl/comm.hpp"

#include <numeric>
#include <ostream>
#include <stdexcept>

namespace sheaf_fmtl {

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::SheafFmtl: return "sheaf-fmtl";
    case Algorithm::DFedU: return "dfedu";
    case Algorithm::Local: return "local";
    case Algorithm::DPSGD: return "dpsgd";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::SheafFmtl, Algorithm::DFedU, Algorithm::Local, Algorithm::DPSGD})
    if (name == to_string(a)) return a;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

std::string_view to_string(BitsConvention convention) {
  return convention == BitsConvention::Table3 ? "table3" : "algorithm1";
}

BitsConvention parse_bits_convention(std::string_view name) {
  if (name == "table3") return BitsConvention::Table3;
  if (name == "algorithm1") return BitsConvention::Algorithm1;
  throw std::invalid_argument("unknown bits convention '" + std::string(name) + "'");
}

std::size_t RoundPayload::total(BitsConvention convention) const {
  const auto& v = per_client(convention);
  return std::accumulate(v.begin(), v.end(), std::size_t{0});
}

RoundPayload scalars_per_round(const SheafGraph& sheaf, Algorithm algorithm) {
  const auto n = sheaf.n_vertices();
  RoundPayload out{std::vector<std::size_t>(n, 0), std::vector<std::size_t>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& inc : sheaf.graph().incidences(i)) {
      switch (algorithm) {
        case Algorithm::SheafFmtl:
          out.table3[i] += sheaf.edge_dim(inc.edge);
          out.algorithm1[i] += 2 * sheaf.edge_dim(inc.edge);
          break;
        case Algorithm::DFedU:
        case Algorithm::DPSGD:
          out.table3[i] += sheaf.stalk_dim(inc.neighbor);
          out.algorithm1[i] += sheaf.stalk_dim(inc.neighbor);
          break;
        case Algorithm::Local:
          break;
      }
    }
  }
  return out;
}

MessageBoard::MessageBoard(const Graph& graph)
    : graph_(&graph), slots_(2 * graph.n_edges()), filled_(2 * graph.n_edges(), false) {}

std::size_t MessageBoard::slot(std::size_t vertex, std::size_t e) const {
  const auto& edge = graph_->edge(e);
  if (vertex == edge.lo) return 2 * e;
  if (vertex == edge.hi) return 2 * e + 1;
  throw std::out_of_range("vertex " + std::to_string(vertex) + " is not an endpoint of edge " +
                          std::to_string(e));
}

void MessageBoard::post(std::size_t sender, std::size_t e, Vector payload) {
  const auto s = slot(sender, e);
  slots_[s] = std::move(payload);
  filled_[s] = true;
}

const Vector& MessageBoard::receive(std::size_t receiver, std::size_t e) const {
  const auto& edge = graph_->edge(e);
  const auto sender = receiver == edge.lo ? edge.hi : edge.lo;
  const auto s = slot(sender, e);
  if (!filled_[s])
    throw std::logic_error("client " + std::to_string(receiver) + " expected a message from client " +
                           std::to_string(sender) + " on edge " + std::to_string(e) +
                           " but none was posted this phase");
  return slots_[s];
}

bool MessageBoard::has(std::size_t sender, std::size_t e) const { return filled_[slot(sender, e)]; }

void MessageBoard::clear() {
  std::fill(filled_.begin(), filled_.end(), false);
  for (auto& v : slots_) v.resize(0);
}

std::vector<MessageBoard::Message> MessageBoard::messages() const {
  std::vector<Message> out;
  for (std::size_t e = 0; e < graph_->n_edges(); ++e) {
    const auto& edge = graph_->edge(e);
    if (filled_[2 * e]) out.push_back({edge.lo, edge.hi, e, static_cast<std::size_t>(slots_[2 * e].size())});
    if (filled_[2 * e + 1])
      out.push_back({edge.hi, edge.lo, e, static_cast<std::size_t>(slots_[2 * e + 1].size())});
  }
  return out;
}

std::vector<std::size_t> MessageBoard::sent_scalars() const {
  std::vector<std::size_t> out(graph_->n_vertices(), 0);
  for (const auto& m : messages()) out[m.sender] += m.length;
  return out;
}

CommLedger::CommLedger(std::size_t n_clients, unsigned scalar_bits, bool keep_messages)
    : n_clients_(n_clients), scalar_bits_(scalar_bits), keep_messages_(keep_messages) {
  if (scalar_bits != 32 && scalar_bits != 64) throw std::invalid_argument("scalar width must be 32 or 64 bits");
}

void CommLedger::touch(std::size_t round) {
  rounds_.try_emplace(round, Counts(n_clients_, {0, 0}));
}

void CommLedger::commit(std::size_t round, int phase, const MessageBoard& board) {
  if (phase != 0 && phase != 1) throw std::invalid_argument("exchange phase must be 0 or 1");
  if (board.graph().n_vertices() != n_clients_)
    throw std::invalid_argument("message board and ledger disagree on client count");
  touch(round);
  auto& counts = rounds_[round];
  for (const auto& m : board.messages()) {
    counts[m.sender][static_cast<std::size_t>(phase)] += m.length;
    if (keep_messages_) log_.push_back({round, phase, m});
  }
}

const CommLedger::Counts& CommLedger::round_counts(std::size_t round) const {
  const auto it = rounds_.find(round);
  if (it == rounds_.end()) throw std::out_of_range("ledger has no entry for round " + std::to_string(round));
  return it->second;
}

std::size_t CommLedger::scalars(std::size_t round, std::size_t client, BitsConvention convention) const {
  const auto& c = round_counts(round).at(client);
  return convention == BitsConvention::Table3 ? c[0] : c[0] + c[1];
}

std::uint64_t CommLedger::cumulative_bits(std::size_t through_round, std::size_t client,
                                          BitsConvention convention) const {
  std::uint64_t total = 0;
  for (const auto& [round, counts] : rounds_) {
    if (round > through_round) break;
    const auto& c = counts.at(client);
    total += (convention == BitsConvention::Table3 ? c[0] : c[0] + c[1]);
  }
  return total * scalar_bits_;
}

std::uint64_t CommLedger::total_bits(std::size_t through_round, BitsConvention convention) const {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n_clients_; ++i) total += cumulative_bits(through_round, i, convention);
  return total;
}

void CommLedger::write_csv(std::ostream& out, BitsConvention convention) const {
  out << "round,client,scalars,cumulative_bits\n";
  std::vector<std::uint64_t> running(n_clients_, 0);
  for (const auto& [round, counts] : rounds_) {
    for (std::size_t i = 0; i < n_clients_; ++i) {
      const auto s = convention == BitsConvention::Table3 ? counts[i][0] : counts[i][0] + counts[i][1];
      running[i] += static_cast<std::uint64_t>(s) * scalar_bits_;
      out << round << ',' << i << ',' << s << ',' << running[i] << '\n';
    }
  }
}

}  // namespace sheaf_fmtl

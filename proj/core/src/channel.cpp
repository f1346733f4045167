#include "qfl/channel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <ostream>
#include <tuple>

namespace qfl::channel {

std::string PartyId::label() const {
    return server ? "server" : "client" + std::to_string(index);
}

void Ledger::append(LedgerEntry entry) {
    if (entry.qubits < 0 || entry.classical_bits < 0) {
        throw DomainError("ledger counts must be non-negative");
    }
    entries_.push_back(std::move(entry));
}

LedgerTotals Ledger::totals() const {
    LedgerTotals t;
    for (const auto& e : entries_) {
        t.qubits += e.qubits;
        t.classical_bits += e.classical_bits;
    }
    return t;
}

LedgerTotals Ledger::totals_for(std::string_view protocol) const {
    LedgerTotals t;
    for (const auto& e : entries_) {
        if (e.protocol == protocol) {
            t.qubits += e.qubits;
            t.classical_bits += e.classical_bits;
        }
    }
    return t;
}

void Ledger::write_csv(std::ostream& out) const {
    out << "protocol,round,from,to,qubits,classical_bits\n";
    for (const auto& e : entries_) {
        out << e.protocol << ',' << e.round << ',' << e.from.label() << ',' << e.to.label() << ','
            << e.qubits << ',' << e.classical_bits << '\n';
    }
}

namespace {

void check_parties(PartyId from, PartyId to) {
    if (from == to) throw DomainError("sender and receiver must be distinct parties");
}

}  // namespace

sim::StateVector send_quantum(Ledger& ledger, PartyId from, PartyId to, sim::StateVector payload,
                              std::string_view protocol, std::int64_t round) {
    check_parties(from, to);
    ledger.append({std::string(protocol), round, from, to, payload.num_qubits(), 0});
    return payload;
}

void send_qubits(Ledger& ledger, PartyId from, PartyId to, std::int64_t qubits,
                 std::string_view protocol, std::int64_t round) {
    check_parties(from, to);
    if (qubits < 1) throw DomainError("quantum transmission must carry at least one qubit");
    ledger.append({std::string(protocol), round, from, to, qubits, 0});
}

void send_classical(Ledger& ledger, PartyId from, PartyId to, std::int64_t bits,
                    std::string_view protocol, std::int64_t round) {
    check_parties(from, to);
    if (bits < 1) throw DomainError("classical message must carry at least one bit");
    ledger.append({std::string(protocol), round, from, to, 0, bits});
}

namespace {

int position_bits(std::int64_t slots) {
    if (slots <= 1) return 1;
    return std::bit_width(static_cast<std::uint64_t>(slots - 1));
}

}  // namespace

DecoyWrap decoy_wrap(Ledger& ledger, PartyId from, PartyId to, std::int64_t data_qubits,
                     const DecoyConfig& cfg, std::string_view protocol, std::int64_t round,
                     Rng& rng) {
    check_parties(from, to);
    if (cfg.count < 0) throw DomainError("decoy count must be >= 0");
    DecoyWrap wrap;
    if (cfg.count == 0) return wrap;

    const std::int64_t slots = data_qubits + cfg.count;
    // Sample decoy positions without replacement, uniformly over all slots.
    std::vector<std::int64_t> all(slots);
    for (std::int64_t i = 0; i < slots; ++i) all[i] = i;
    for (std::int64_t i = 0; i < cfg.count; ++i) {
        std::uniform_int_distribution<std::int64_t> pick(i, slots - 1);
        std::swap(all[i], all[pick(rng)]);
    }
    wrap.positions.assign(all.begin(), all.begin() + cfg.count);
    std::sort(wrap.positions.begin(), wrap.positions.end());

    std::uniform_int_distribution<int> pool(0, 3);
    for (std::int64_t i = 0; i < cfg.count; ++i) {
        const int draw = pool(rng);
        DecoyQubit q{draw < 2 ? Basis::Z : Basis::X, draw & 1};
        wrap.preparations.push_back(q);
        wrap.in_transit.push_back(q);
    }

    // The sender announces positions and preparation bases over a classical
    // channel: one slot index plus one basis flag and one bit flag per decoy.
    wrap.side_channel_bits = cfg.count * (position_bits(slots) + 2);
    send_classical(ledger, from, to, wrap.side_channel_bits, protocol, round);
    send_qubits(ledger, from, to, cfg.count, protocol, round);
    return wrap;
}

void eve_intercept_resend(std::vector<DecoyQubit>& in_transit, Rng& rng,
                          double interception_probability) {
    if (interception_probability < 0.0 || interception_probability > 1.0) {
        throw DomainError("interception probability outside [0, 1]");
    }
    std::uniform_real_distribution<double> touch(0.0, 1.0);
    std::uniform_int_distribution<int> basis_pick(0, 1);
    std::uniform_int_distribution<int> coin(0, 1);
    for (DecoyQubit& q : in_transit) {
        if (interception_probability < 1.0 && touch(rng) >= interception_probability) continue;
        const Basis eve_basis = basis_pick(rng) == 0 ? Basis::Z : Basis::X;
        if (eve_basis == q.basis) continue;  // eigenstate, measurement changes nothing
        // Mutually unbiased basis: the outcome is a fair coin and the qubit is
        // re-prepared in Eve's basis.
        q = DecoyQubit{eve_basis, coin(rng)};
    }
}

void eve_apply(const EveModel& model, std::vector<DecoyQubit>& in_transit, Rng& rng) {
    if (model.strategy == EveModel::Strategy::None) return;
    eve_intercept_resend(in_transit, rng, model.interception_probability);
}

DecoyVerification decoy_verify(std::span<const DecoyQubit> received,
                               std::span<const DecoyQubit> preparations, Rng& rng) {
    if (received.size() != preparations.size()) {
        throw DomainError("decoy count does not match announced preparations");
    }
    DecoyVerification v;
    v.checked = static_cast<std::int64_t>(received.size());
    std::uniform_int_distribution<int> coin(0, 1);
    for (std::size_t i = 0; i < received.size(); ++i) {
        const DecoyQubit& got = received[i];
        const DecoyQubit& prep = preparations[i];
        const int outcome = got.basis == prep.basis ? got.bit : coin(rng);
        if (outcome != prep.bit) ++v.mismatches;
    }
    v.eavesdropper_detected = v.mismatches > 0;
    return v;
}

std::vector<ReportRow> ledger_report(const Ledger& ledger, ReportKeys keys) {
    using Key = std::tuple<std::string, std::int64_t, std::string, std::string>;
    std::map<Key, LedgerTotals> groups;
    for (const auto& e : ledger.entries()) {
        Key k{keys.by_protocol ? e.protocol : std::string{}, keys.by_round ? e.round : -1,
              keys.by_parties ? e.from.label() : std::string{},
              keys.by_parties ? e.to.label() : std::string{}};
        auto& t = groups[k];
        t.qubits += e.qubits;
        t.classical_bits += e.classical_bits;
    }
    std::vector<ReportRow> rows;
    rows.reserve(groups.size());
    for (const auto& [k, t] : groups) {
        rows.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k), t.qubits,
                        t.classical_bits});
    }
    return rows;
}

}  // namespace qfl::channel

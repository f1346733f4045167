#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qfl/errors.hpp"
#include "qfl/rng.hpp"
#include "qfl/statevector.hpp"

namespace qfl::channel {

struct PartyId {
    bool server = false;
    int index = 0;  // client index, ignored for the server

    static PartyId make_server() { return PartyId{true, 0}; }
    static PartyId client(int idx) { return PartyId{false, idx}; }

    std::string label() const;
    friend bool operator==(const PartyId&, const PartyId&) = default;
};

struct LedgerEntry {
    std::string protocol;
    std::int64_t round = 0;
    PartyId from;
    PartyId to;
    std::int64_t qubits = 0;
    std::int64_t classical_bits = 0;
};

struct LedgerTotals {
    std::int64_t qubits = 0;
    std::int64_t classical_bits = 0;
};

/// Append-only account of everything that crossed a channel.
class Ledger {
public:
    void append(LedgerEntry entry);
    const std::vector<LedgerEntry>& entries() const { return entries_; }

    LedgerTotals totals() const;
    LedgerTotals totals_for(std::string_view protocol) const;

    /// CSV with columns protocol,round,from,to,qubits,classical_bits.
    void write_csv(std::ostream& out) const;

private:
    std::vector<LedgerEntry> entries_;
};

/// Records a quantum transmission and hands the payload to the receiver.
sim::StateVector send_quantum(Ledger& ledger, PartyId from, PartyId to, sim::StateVector payload,
                              std::string_view protocol, std::int64_t round);

/// Cost-model variant: charges a raw qubit count without moving a register.
void send_qubits(Ledger& ledger, PartyId from, PartyId to, std::int64_t qubits,
                 std::string_view protocol, std::int64_t round);

void send_classical(Ledger& ledger, PartyId from, PartyId to, std::int64_t bits,
                    std::string_view protocol, std::int64_t round);

// ---------------------------------------------------------------------------
// Decoy-state tamper detection.

enum class Basis : std::uint8_t { Z, X };

/// A single decoy qubit: an eigenstate `bit` of `basis`. The pool is
/// {|0>, |1>, |+>, |->}. Decoys are uncorrelated with the data register, so
/// this product-state representation is exact.
struct DecoyQubit {
    Basis basis = Basis::Z;
    int bit = 0;
};

struct DecoyConfig {
    std::int64_t count = 0;  // n_d decoys per wrapped transmission
};

struct DecoyWrap {
    std::vector<std::int64_t> positions;     // decoy slots among data_qubits + count
    std::vector<DecoyQubit> preparations;    // what the sender prepared
    std::vector<DecoyQubit> in_transit;      // what is on the wire (Eve may tamper)
    std::int64_t side_channel_bits = 0;      // classical bits for positions + bases
};

/// Draws decoys, interleaves them with a `data_qubits`-wide payload, and
/// charges the classical side channel (position indices plus basis/bit flags)
/// to the ledger. The decoy qubits themselves are charged as extra quantum
/// traffic.
DecoyWrap decoy_wrap(Ledger& ledger, PartyId from, PartyId to, std::int64_t data_qubits,
                     const DecoyConfig& cfg, std::string_view protocol, std::int64_t round,
                     Rng& rng);

struct EveModel {
    enum class Strategy { None, InterceptResend };
    Strategy strategy = Strategy::None;
    double interception_probability = 1.0;  // fraction of qubits touched
};

/// Intercept-resend attack: each touched decoy is measured in a uniformly
/// random basis from {Z, X} and re-prepared in the observed eigenstate. The
/// default touches every decoy (the worst case for stealth).
void eve_intercept_resend(std::vector<DecoyQubit>& in_transit, Rng& rng,
                          double interception_probability = 1.0);

/// Applies the configured strategy to the qubits on the wire.
void eve_apply(const EveModel& model, std::vector<DecoyQubit>& in_transit, Rng& rng);

struct DecoyVerification {
    std::int64_t checked = 0;
    std::int64_t mismatches = 0;
    bool eavesdropper_detected = false;
};

/// Receiver measures each decoy in its preparation basis and compares with
/// the announced bit.
DecoyVerification decoy_verify(std::span<const DecoyQubit> received,
                               std::span<const DecoyQubit> preparations, Rng& rng);

// ---------------------------------------------------------------------------
// Reporting.

struct ReportKeys {
    bool by_protocol = true;
    bool by_round = false;
    bool by_parties = false;
};

struct ReportRow {
    std::string protocol;  // empty when not grouped
    std::int64_t round = -1;
    std::string from;
    std::string to;
    std::int64_t qubits = 0;
    std::int64_t classical_bits = 0;
};

std::vector<ReportRow> ledger_report(const Ledger& ledger, ReportKeys keys);

}  // namespace qfl::channel

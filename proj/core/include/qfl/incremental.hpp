#pragma once

#include <cstdint>
#include <span>

#include "qfl/channel.hpp"
#include "qfl/errors.hpp"
#include "qfl/rng.hpp"
#include "qfl/statevector.hpp"

namespace qfl::incremental {

// ---------------------------------------------------------------------------
// GHZ phase aggregation.

enum class Distributor { Server, TrustedClient };

struct GhzConfig {
    int clients = 3;
    std::int64_t shots_per_quadrature = 10000;
    Distributor distributor = Distributor::Server;

    void validate() const;
};

/// (|0...0> + |1...1>) / sqrt(2) over clients + 1 qubits; qubit 0 is the
/// server's.
sim::StateVector ghz_prepare(int clients);

/// Phase(-g) on client k's qubit; on the GHZ support this multiplies the
/// all-ones branch by e^{-i g}. Order across clients is irrelevant.
void ghz_client_encode(sim::StateVector& state, int client, double weighted_gradient);

enum class Quadrature { X, Y };

/// Server-side readout of one shot: CNOT fan-in, abort unless the clients'
/// register reads all zero, then measure the server qubit in the chosen
/// quadrature. X gives P(0) = (1 + cos Phi)/2, Y gives P(0) = (1 + sin Phi)/2.
int ghz_decode_shot(sim::StateVector state, int clients, Quadrature quadrature, Rng& rng);

struct PhaseEstimate {
    double angle = 0.0;  // reduced to [0, 2 pi)
    double std_error = 0.0;
    std::int64_t shots_used = 0;
};

/// Two-quadrature Ramsey estimate of Phi = sum_k g_k (mod 2 pi) with the
/// ledger charged for distribution and return of every client qubit.
PhaseEstimate ghz_estimate_sum(channel::Ledger& ledger, const GhzConfig& cfg,
                               std::span<const double> weighted_gradients, std::int64_t round,
                               Rng& rng);

/// Predicted qubit traffic: 2 * (2 shots_per_quadrature) * clients * d.
std::int64_t ghz_cost(const GhzConfig& cfg, std::int64_t d);

struct PairingAttackResult {
    double recovered = 0.0;
    double truth = 0.0;
    double abs_error = 0.0;
};

/// Malicious-distributor demo: only the target's qubit is entangled with the
/// server's, every other client receives |+>. The server Ramsey-reads the
/// pair and recovers that client's gradient alone. Unavailable (throws
/// ConfigError) under TrustedClient distribution.
PairingAttackResult ghz_malicious_pairing_demo(const GhzConfig& cfg,
                                               std::span<const double> weighted_gradients,
                                               int target, Rng& rng);

// ---------------------------------------------------------------------------
// Secure multiparty summation.

struct SmsConfig {
    int clients = 3;
    int phase_bits = 8;   // h; gradients live on the grid {0, delta, ..., 2 pi}
    int repetitions = 1;  // p

    void validate() const;
    double delta() const;  // 2 pi / 2^h
};

/// Nearest grid point of the gradient, modulo 2^h.
std::uint64_t sms_quantize(double gradient, int phase_bits);

/// QFT of |g1> fanned out to the ancilla register:
/// sum_l e^{2 pi i g1 l / 2^h} |l>|l> / sqrt(2^h). Qubits [0, h) stay with the
/// first client, [h, 2h) travel the ring.
sim::StateVector sms_initial_state(std::uint64_t g1, int phase_bits);

/// Adds g_k into the Fourier phases via per-qubit phase gates on the ancilla.
void sms_client_accumulate(sim::StateVector& state, std::uint64_t g_k, int phase_bits);

/// First client uncomputes the ancilla with CNOTs and measures it; any
/// nonzero outcome throws TamperDetected. Returns the released h-qubit
/// register for the server.
sim::StateVector sms_verify_and_release(sim::StateVector state, int phase_bits, Rng& rng);

/// Inverse QFT and measurement: sum_k g_k mod 2^h, deterministic for honest
/// runs.
std::uint64_t sms_server_decode(sim::StateVector state, Rng& rng);

struct SmsRunResult {
    std::uint64_t decoded_sum = 0;  // sum g_k mod 2^h
    PhaseEstimate estimate;         // angle = decoded * delta, error = m delta / 2
};

/// Full ring for one parameter, repeated `repetitions` times with majority
/// vote; charges (clients + 1) * h qubits per repetition.
SmsRunResult sms_run(channel::Ledger& ledger, const SmsConfig& cfg,
                     std::span<const double> gradients, std::int64_t round, Rng& rng);

/// Predicted qubit traffic: (m + 1) * d * h * p.
std::int64_t sms_cost(const SmsConfig& cfg, std::int64_t d);

enum class SmsAttack {
    InverseQftMidRing,  // caught with probability 1 - 2^{-h}
    MeasureMidRing,     // computational measurement, evades the ancilla check
};

struct SmsAttackStats {
    double detection_rate = 0.0;
    std::int64_t trials = 0;
};

/// Runs the ring with one malicious client and reports how often the first
/// client's ancilla check catches it.
SmsAttackStats sms_attack_demo(const SmsConfig& cfg, SmsAttack attack, int attacker, int trials,
                               Rng& rng);

}  // namespace qfl::incremental

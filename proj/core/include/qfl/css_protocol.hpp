#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qfl/channel.hpp"
#include "qfl/errors.hpp"
#include "qfl/fl_model.hpp"
#include "qfl/rng.hpp"
#include "qfl/statevector.hpp"

namespace qfl::css {

/// Parameters of the secret-sharing aggregation. The pad modulus is
/// R = 2^log2_modulus; gradients are quantized at scale 2^fraction_bits.
struct CssConfig {
    int clients = 4;
    int log2_modulus = 64;    // >= 32
    int fraction_bits = 40;   // f
    int word_bits = 64;       // classical word size charged per transmitted value
    int exact_pad_bits = 16;  // pad magnitude for the unreduced (quantum) path
    double gradient_bound = 4.0;  // public bound on |gradient|, sets the offsets

    void validate() const;
};

/// Pairwise one-time pads for a single parameter index; entry (i, k) is the
/// value client i sampled for client k. The diagonal is unused.
struct PadMatrix {
    int m = 0;
    std::vector<std::uint64_t> s;

    std::uint64_t at(int i, int k) const { return s[static_cast<std::size_t>(i) * m + k]; }
    std::uint64_t& at(int i, int k) { return s[static_cast<std::size_t>(i) * m + k]; }
};

PadMatrix sample_pads(int m, const CssConfig& cfg, Rng& rng);

/// p_{i,k} = s_{i,k} - s_{k,i} (mod R); antisymmetric, zero diagonal.
PadMatrix compute_perturbations(const PadMatrix& pads, const CssConfig& cfg);

/// Quantizes one gradient value and applies the client's mask modulo R:
/// y_i = round(grad 2^f) + round((1/w_i) sum_k p_{i,k}) (mod R).
std::uint64_t mask_gradient(double grad, fl::ClientWeight weight,
                            std::span<const std::uint64_t> p_row, const CssConfig& cfg);

/// Weighted aggregation of masked uploads; the pads telescope modulo R and
/// the result is de-quantized.
double server_aggregate_classical(std::span<const std::uint64_t> masked,
                                  std::span<const fl::ClientWeight> weights,
                                  const CssConfig& cfg);

// Unreduced (exact integer) masking used by the amplitude-encoded variant:
// modular reduction would break the real-valued cancellation inside the
// encoded state.
struct SignedPads {
    int m = 0;
    std::vector<std::int64_t> p;  // perturbations, antisymmetric in Z

    std::int64_t at(int i, int k) const { return p[static_cast<std::size_t>(i) * m + k]; }
};

SignedPads sample_exact_perturbations(int m, const CssConfig& cfg, Rng& rng);

std::int64_t mask_gradient_exact(double grad, fl::ClientWeight weight,
                                 std::span<const std::int64_t> p_row, const CssConfig& cfg);

/// Public per-client shift that makes every exact-mode masked value
/// non-negative; the server subtracts the weighted shifts after estimation.
std::int64_t public_offset(fl::ClientWeight weight, const CssConfig& cfg);

struct CostTotals {
    std::int64_t classical_bits = 0;
    std::int64_t qubits = 0;
};

CostTotals cost_classical(const CssConfig& cfg, std::int64_t d);
CostTotals cost_quantum(const CssConfig& cfg, std::int64_t d, std::int64_t shots_per_parameter);

struct AmplitudeEncoding {
    sim::StateVector state;      // ceil(log2 m) qubits, zero padded
    double normalization = 0.0;  // N_c, disclosed classically
};

/// |phi_c> = (1/N_c) sum_i y_i |i>. Values must not be all zero.
AmplitudeEncoding amplitude_encode_masked(std::span<const double> values);

struct SwapAggregate {
    double estimate = 0.0;   // N_s N_c sqrt(F-hat)
    double std_error = 0.0;  // delta-method error of the estimate
    bool clamped = false;    // F-hat came out negative and was clamped to zero
};

/// Estimates sum_i w_i y_i from SWAP tests between the client state and the
/// server's weight state. Valid for entrywise non-negative inputs.
SwapAggregate swap_aggregate(const sim::StateVector& phi_c, double n_c,
                             std::span<const double> weights, std::int64_t shots, Rng& rng);

// ---------------------------------------------------------------------------
// One full aggregation round for a single parameter, ledger charged.

double classical_round(channel::Ledger& ledger, const CssConfig& cfg,
                       std::span<const double> gradients,
                       std::span<const fl::ClientWeight> weights, std::int64_t round, Rng& rng);

struct QuantumRoundResult {
    double estimate = 0.0;
    double std_error = 0.0;
};

QuantumRoundResult quantum_round(channel::Ledger& ledger, const CssConfig& cfg,
                                 std::span<const double> gradients,
                                 std::span<const fl::ClientWeight> weights, std::int64_t shots,
                                 std::int64_t round, Rng& rng);

}  // namespace qfl::css

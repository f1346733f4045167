#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qfl/channel.hpp"
#include "qfl/errors.hpp"
#include "qfl/rng.hpp"
#include "qfl/statevector.hpp"

namespace qfl::bqbc {

/// Binary expansion value = sum_i 2^{exponent - i} bits[i], i in [0, length).
struct FixedPointCode {
    int highest_exponent = 0;
    std::vector<std::uint8_t> bits;

    double reconstruct() const;
};

/// Greedy expansion of value in [0, 2^{exponent+1}).
FixedPointCode encode_fixed_point(double value, int exponent, int length);

/// Row-per-client bit matrix (weight codes a, gradient codes b).
struct BitMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> bits;

    static BitMatrix zeros(int rows, int cols);
    std::uint8_t at(int r, int c) const { return bits[static_cast<std::size_t>(r) * cols + c]; }
    std::uint8_t& at(int r, int c) { return bits[static_cast<std::size_t>(r) * cols + c]; }
    std::int64_t row_sum(int r) const;
    std::int64_t total() const;
};

struct BqbcConfig {
    int clients = 2;
    int code_length = 8;      // l0, a power of two
    int counting_qubits = 7;  // t; 0 means derive from epsilon
    double epsilon = 0.05;
    int redundancy = 1;       // r, a power of two
    bool phase_padding = false;
    bool exact_counting = false;
    int verification_rounds = 1;  // verification states consumed per counting run

    void validate() const;
    int padded_clients() const;
    int expanded_length() const { return code_length * redundancy; }
    /// q = ceil(log2(m r l0)); the travelling register adds one ancilla qubit.
    int index_qubit_count() const;
    int counting_qubit_count() const;
};

/// Maps estimation error to counting-register width: t = ceil(log2(1/eps)) + 3.
int counting_qubits_for(double epsilon);

// ---------------------------------------------------------------------------
// State-level protocol steps. The travelling register is q index qubits
// followed by the weight ancilla o_a as the last qubit.

/// Uniform superposition over (client, bit) indices with the ancilla carrying
/// the weight bit: sum_{k,i} |k,i>|a_{ki}>. Rows beyond `a` read as zero.
sim::StateVector server_prepare_index_state(const BqbcConfig& cfg, const BitMatrix& a);

/// First client's check against a biased server: decode the ancilla with the
/// globally known weight bits, measure the index register in the X basis and
/// accept only the all-+1 outcome. Consumes the state.
bool client_verify_uniform(sim::StateVector state, const BqbcConfig& cfg, const BitMatrix& a,
                           Rng& rng);

/// Client k's phase step: (-1)^{a_{ki} b_{ki}} on its block, via the ancilla
/// branch, plus the optional one-time pad phase on the complementary ancilla
/// branch of the same block.
sim::StateVector client_phase_encode(sim::StateVector state, const BqbcConfig& cfg, int client,
                                     std::span<const std::uint8_t> b_row, int pad_bit);

// ---------------------------------------------------------------------------
// Redundant encoding (privacy amplification).

struct RedundantCode {
    int r = 1;
    BitMatrix a;                              // r-fold copies of the weight bits
    BitMatrix b;                              // secret-position expansion
    std::vector<std::uint8_t> method_flags;   // 0: zeros elsewhere, 1: ones elsewhere
};

/// Expands weight bits by copying and gradient bits by hiding each b_{ki} in
/// one of r digits (uniform secret position), with the remaining digits all
/// zero or all one per the client's method flag.
RedundantCode redundant_encode(const BitMatrix& a, const BitMatrix& b, int r,
                               std::span<const std::uint8_t> method_flags, Rng& rng);
RedundantCode redundant_encode(const BitMatrix& a, const BitMatrix& b, int r, Rng& rng);

/// Removes the ones-elsewhere surplus ((r-1) sum_i a_{ki} per flagged client)
/// from a raw marked-count estimate, recovering sum a.b.
double redundant_reconcile(double raw_marked, std::span<const std::uint8_t> method_flags,
                           const BitMatrix& a_original, int r);

struct LeakProbability {
    double value = 0.0;
    bool clamped = false;
};

/// Chance that the server pins down one specific gradient bit per protocol
/// run: 1 / (r m l0 epsilon), clamped to [0, 1].
LeakProbability leak_probability(int r, int m, int l0, double epsilon);

// ---------------------------------------------------------------------------
// Full estimation runs.

struct EstimateResult {
    double mean_estimate = 0.0;    ///< (1/(m l0)) sum_{k,i} a_{ki} b_{ki}
    double marked_estimate = 0.0;  ///< corrected marked count (sum a.b)
    double raw_marked = 0.0;       ///< counting output before corrections
    std::uint64_t oracle_calls = 0;
    double mean_error_bound = 0.0;  ///< counting bound scaled to the mean
    int register_width = 0;         ///< index qubits + ancilla
    bool exact = false;
};

/// One counting run: verification state, 2^t - 1 controlled ring passes, pad
/// and method-flag disclosure, corrections. With exact_counting the
/// phase-estimation sampling is replaced by exact marked-state enumeration;
/// everything else, including ledger charges, is unchanged.
EstimateResult run_estimate(channel::Ledger& ledger, const BqbcConfig& cfg, const BitMatrix& a,
                            const BitMatrix& b, std::int64_t round, Rng& rng);

struct ConvolutionResult {
    double value = 0.0;
    double counting_error_bound = 0.0;  ///< sum of per-shift counting bounds, weighted
    double encoding_error_bound = 0.0;  ///< fixed-point truncation budget
};

/// sum_k w_k g_k via the shift decomposition
/// w g = sum_lambda 2^{u+v-lambda} sum_i a_i b_{lambda-i}, one counting run
/// per shift. Inputs must be non-negative and representable at the given
/// exponents.
ConvolutionResult weighted_sum_via_convolution(channel::Ledger& ledger, const BqbcConfig& cfg,
                                               std::span<const double> weights,
                                               std::span<const double> gradients,
                                               int weight_exponent, int gradient_exponent,
                                               std::int64_t round, Rng& rng);

// ---------------------------------------------------------------------------
// Malicious-server demo.

struct AttackDemoResult {
    double detection_rate = 0.0;
    double leaked_bit_success_rate = 0.0;  ///< among trials that evaded detection
    std::int64_t evaded_trials = 0;
};

/// Concentrated-state attack: the server aims the index register at one
/// (client, bit) pair and reads the returned relative phase. Detection comes
/// from the first client's uniformity check; random codes are drawn per trial.
AttackDemoResult malicious_server_attack_demo(const BqbcConfig& cfg, int target_client,
                                              int target_bit, int trials, Rng& rng,
                                              bool honest_server = false);

}  // namespace qfl::bqbc

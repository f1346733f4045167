#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <vector>

#include "qfl/errors.hpp"
#include "qfl/rng.hpp"

namespace qfl::sim {

using Amp = std::complex<double>;

/// Largest register the dense simulator will allocate (2^22 amplitudes,
/// about 64 MiB of complex doubles).
inline constexpr int kQubitCap = 22;

/// Norm drift tolerated after any sequence of unitary operations.
inline constexpr double kNormTol = 1e-10;

/// Contiguous block of qubits inside a register. Qubit 0 is the most
/// significant bit of the basis-state label.
struct QubitRange {
    int start = 0;
    int len = 0;
};

/// Maps a sub-register basis value to a phase angle in radians.
using DiagonalOracle = std::function<double(std::uint64_t)>;

/// Single-qubit unitary, row-major 2x2.
struct Gate {
    std::array<Amp, 4> u;

    static Gate h();
    static Gate x();
    static Gate z();
    static Gate s();
    static Gate sdg();
    static Gate phase(double theta);
};

/// Dense statevector over n qubits. Value type: copies are independent
/// registers, operations mutate the (exclusively owned) receiver.
class StateVector {
public:
    StateVector() = default;

    /// |basis_index> on num_qubits qubits.
    static StateVector basis(int num_qubits, std::uint64_t basis_index);

    /// Adopts an explicit amplitude vector; must be normalized within kNormTol.
    static StateVector from_amplitudes(int num_qubits, std::vector<Amp> amps);

    static StateVector tensor(const StateVector& a, const StateVector& b);

    int num_qubits() const { return num_qubits_; }
    std::uint64_t dim() const { return amps_.size(); }
    Amp amplitude(std::uint64_t z) const { return amps_[z]; }
    std::span<const Amp> amplitudes() const { return amps_; }
    double probability(std::uint64_t z) const { return std::norm(amps_[z]); }
    double norm_sq() const;

    StateVector& apply(const Gate& g, int target);
    StateVector& apply_controlled(const Gate& g, std::span<const int> controls, int target);
    StateVector& apply_controlled(const Gate& g, std::initializer_list<int> controls, int target);

    /// Multiplies the amplitude of every basis state whose `range` bits read
    /// value v by e^{i oracle(v)}.
    StateVector& apply_diagonal(const DiagonalOracle& oracle, QubitRange range);

    StateVector& qft(QubitRange range);
    StateVector& iqft(QubitRange range);

    /// Reflection 2|s><s| - I about the uniform state of the sub-register.
    StateVector& grover_diffusion(QubitRange range);

    /// Projective measurement of `range` in the computational basis.
    /// Collapses and renormalizes the register; returns the observed bits.
    std::uint64_t measure(QubitRange range, Rng& rng);

    /// Born distribution of `range` marginalized over the other qubits.
    std::vector<double> marginal_probabilities(QubitRange range) const;

    /// Repeated-preparation sampling; the register itself is left unchanged.
    std::map<std::uint64_t, std::int64_t> sample_counts(QubitRange range, std::int64_t shots,
                                                        Rng& rng) const;

    /// Splits off `range` when the rest of the register is disentangled and
    /// sits in a single basis state (e.g. after measuring it).
    StateVector extract(QubitRange range) const;

private:
    StateVector(int num_qubits, std::vector<Amp> amps)
        : num_qubits_(num_qubits), amps_(std::move(amps)) {}

    std::uint64_t qubit_mask(int qubit) const { return 1ull << (num_qubits_ - 1 - qubit); }
    void check_qubit(int qubit) const;
    void check_range(QubitRange range) const;
    StateVector& swap_qubits(int a, int b);

    int num_qubits_ = 0;
    std::vector<Amp> amps_;
};

/// SWAP-test estimate of |<psi|phi>|^2 from `shots` ancilla measurements.
/// Returns 1 - 2 * (fraction of ancilla-1 outcomes).
double swap_test(const StateVector& psi, const StateVector& phi, std::int64_t shots, Rng& rng);

struct CountEstimate {
    double marked_estimate = 0.0;     ///< M-hat = N sin^2(pi y / 2^t)
    std::uint64_t oracle_calls = 0;   ///< controlled oracle applications, 2^t - 1
    std::uint64_t phase_index = 0;    ///< raw measurement y of the counting register
    int counting_qubits = 0;
    int index_qubits = 0;
};

/// Quantum counting: phase estimation on the Grover iterate of `oracle`
/// (whose values must lie in {0, pi}) over 2^index_qubits basis states.
CountEstimate quantum_count(const DiagonalOracle& oracle, int index_qubits, int counting_qubits,
                            Rng& rng);

/// |M-hat - M| <= 2 pi sqrt(M N) / 2^t + pi^2 N / 2^{2t}, holding with
/// probability >= 8/pi^2.
double counting_error_bound(double marked, std::uint64_t search_space, int counting_qubits);

}  // namespace qfl::sim

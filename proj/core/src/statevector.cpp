#include "qfl/statevector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qfl::sim {

namespace {

constexpr double kPi = std::numbers::pi;
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

}  // namespace

Gate Gate::h() { return Gate{{Amp{kInvSqrt2}, Amp{kInvSqrt2}, Amp{kInvSqrt2}, Amp{-kInvSqrt2}}}; }
Gate Gate::x() { return Gate{{Amp{0}, Amp{1}, Amp{1}, Amp{0}}}; }
Gate Gate::z() { return Gate{{Amp{1}, Amp{0}, Amp{0}, Amp{-1}}}; }
Gate Gate::s() { return Gate{{Amp{1}, Amp{0}, Amp{0}, Amp{0, 1}}}; }
Gate Gate::sdg() { return Gate{{Amp{1}, Amp{0}, Amp{0}, Amp{0, -1}}}; }
Gate Gate::phase(double theta) {
    return Gate{{Amp{1}, Amp{0}, Amp{0}, std::polar(1.0, theta)}};
}

StateVector StateVector::basis(int num_qubits, std::uint64_t basis_index) {
    if (num_qubits < 1 || num_qubits > kQubitCap) {
        throw CapacityError("register size " + std::to_string(num_qubits) +
                            " outside [1, " + std::to_string(kQubitCap) + "]");
    }
    const std::uint64_t dim = 1ull << num_qubits;
    if (basis_index >= dim) {
        throw DomainError("basis index " + std::to_string(basis_index) +
                          " out of range for " + std::to_string(num_qubits) + " qubits");
    }
    std::vector<Amp> amps(dim);
    amps[basis_index] = Amp{1.0};
    return StateVector(num_qubits, std::move(amps));
}

StateVector StateVector::from_amplitudes(int num_qubits, std::vector<Amp> amps) {
    if (num_qubits < 1 || num_qubits > kQubitCap) {
        throw CapacityError("register size " + std::to_string(num_qubits) + " outside cap");
    }
    if (amps.size() != (1ull << num_qubits)) {
        throw DomainError("amplitude vector length does not match qubit count");
    }
    double n2 = 0.0;
    for (const Amp& a : amps) n2 += std::norm(a);
    if (std::abs(n2 - 1.0) > 1e-8) {
        throw DomainError("amplitude vector is not normalized");
    }
    const double scale = 1.0 / std::sqrt(n2);
    for (Amp& a : amps) a *= scale;
    return StateVector(num_qubits, std::move(amps));
}

StateVector StateVector::tensor(const StateVector& a, const StateVector& b) {
    const int n = a.num_qubits_ + b.num_qubits_;
    if (n > kQubitCap) throw CapacityError("tensor product exceeds qubit cap");
    std::vector<Amp> amps(1ull << n);
    const std::uint64_t bd = b.dim();
    for (std::uint64_t i = 0; i < a.dim(); ++i) {
        if (a.amps_[i] == Amp{}) continue;
        for (std::uint64_t j = 0; j < bd; ++j) {
            amps[i * bd + j] = a.amps_[i] * b.amps_[j];
        }
    }
    return StateVector(n, std::move(amps));
}

double StateVector::norm_sq() const {
    double n2 = 0.0;
    for (const Amp& a : amps_) n2 += std::norm(a);
    return n2;
}

void StateVector::check_qubit(int qubit) const {
    if (qubit < 0 || qubit >= num_qubits_) {
        throw DomainError("qubit index " + std::to_string(qubit) + " out of range");
    }
}

void StateVector::check_range(QubitRange range) const {
    if (range.start < 0 || range.len < 1 || range.start + range.len > num_qubits_) {
        throw DomainError("qubit range [" + std::to_string(range.start) + ", +" +
                          std::to_string(range.len) + ") out of range");
    }
}

StateVector& StateVector::apply(const Gate& g, int target) {
    check_qubit(target);
    const std::uint64_t mask = qubit_mask(target);
    const std::uint64_t dim = amps_.size();
    for (std::uint64_t z = 0; z < dim; ++z) {
        if (z & mask) continue;
        const std::uint64_t z1 = z | mask;
        const Amp a0 = amps_[z];
        const Amp a1 = amps_[z1];
        amps_[z] = g.u[0] * a0 + g.u[1] * a1;
        amps_[z1] = g.u[2] * a0 + g.u[3] * a1;
    }
    return *this;
}

StateVector& StateVector::apply_controlled(const Gate& g, std::span<const int> controls,
                                           int target) {
    check_qubit(target);
    std::uint64_t cmask = 0;
    for (int c : controls) {
        check_qubit(c);
        if (c == target) throw DomainError("control and target qubits overlap");
        const std::uint64_t m = qubit_mask(c);
        if (cmask & m) throw DomainError("duplicate control qubit");
        cmask |= m;
    }
    const std::uint64_t tmask = qubit_mask(target);
    const std::uint64_t dim = amps_.size();
    for (std::uint64_t z = 0; z < dim; ++z) {
        if (z & tmask) continue;
        if ((z & cmask) != cmask) continue;
        const std::uint64_t z1 = z | tmask;
        const Amp a0 = amps_[z];
        const Amp a1 = amps_[z1];
        amps_[z] = g.u[0] * a0 + g.u[1] * a1;
        amps_[z1] = g.u[2] * a0 + g.u[3] * a1;
    }
    return *this;
}

StateVector& StateVector::apply_controlled(const Gate& g, std::initializer_list<int> controls,
                                           int target) {
    return apply_controlled(g, std::span<const int>(controls.begin(), controls.size()), target);
}

StateVector& StateVector::apply_diagonal(const DiagonalOracle& oracle, QubitRange range) {
    check_range(range);
    const int shift = num_qubits_ - range.start - range.len;
    const std::uint64_t sub_dim = 1ull << range.len;
    const std::uint64_t sub_mask = sub_dim - 1;
    // Tabulate once; oracles must be deterministic.
    std::vector<Amp> phase(sub_dim);
    for (std::uint64_t v = 0; v < sub_dim; ++v) {
        const double theta = oracle(v);
        if (!std::isfinite(theta)) throw DomainError("diagonal oracle produced non-finite phase");
        phase[v] = std::polar(1.0, theta);
    }
    const std::uint64_t dim = amps_.size();
    for (std::uint64_t z = 0; z < dim; ++z) {
        amps_[z] *= phase[(z >> shift) & sub_mask];
    }
    return *this;
}

StateVector& StateVector::swap_qubits(int a, int b) {
    if (a == b) return *this;
    const std::uint64_t ma = qubit_mask(a);
    const std::uint64_t mb = qubit_mask(b);
    const std::uint64_t dim = amps_.size();
    for (std::uint64_t z = 0; z < dim; ++z) {
        const bool ba = z & ma;
        const bool bb = z & mb;
        if (ba && !bb) {
            std::swap(amps_[z], amps_[(z & ~ma) | mb]);
        }
    }
    return *this;
}

StateVector& StateVector::qft(QubitRange range) {
    check_range(range);
    // Standard circuit, most significant qubit first, with the final
    // bit-reversal swap so that |x> -> sum_y e^{2 pi i x y / 2^len} |y> / sqrt(2^len).
    for (int j = 0; j < range.len; ++j) {
        const int qj = range.start + j;
        apply(Gate::h(), qj);
        for (int k = j + 1; k < range.len; ++k) {
            const int qk = range.start + k;
            apply_controlled(Gate::phase(kPi / double(1ull << (k - j))), {qk}, qj);
        }
    }
    for (int j = 0; j < range.len / 2; ++j) {
        swap_qubits(range.start + j, range.start + range.len - 1 - j);
    }
    return *this;
}

StateVector& StateVector::iqft(QubitRange range) {
    check_range(range);
    for (int j = 0; j < range.len / 2; ++j) {
        swap_qubits(range.start + j, range.start + range.len - 1 - j);
    }
    for (int j = range.len - 1; j >= 0; --j) {
        const int qj = range.start + j;
        for (int k = range.len - 1; k > j; --k) {
            const int qk = range.start + k;
            apply_controlled(Gate::phase(-kPi / double(1ull << (k - j))), {qk}, qj);
        }
        apply(Gate::h(), qj);
    }
    return *this;
}

StateVector& StateVector::grover_diffusion(QubitRange range) {
    check_range(range);
    const int shift = num_qubits_ - range.start - range.len;
    const std::uint64_t sub_dim = 1ull << range.len;
    const std::uint64_t hi_dim = 1ull << range.start;
    const std::uint64_t lo_dim = 1ull << shift;
    for (std::uint64_t hi = 0; hi < hi_dim; ++hi) {
        for (std::uint64_t lo = 0; lo < lo_dim; ++lo) {
            const std::uint64_t base = (hi << (num_qubits_ - range.start)) | lo;
            Amp mean{};
            for (std::uint64_t v = 0; v < sub_dim; ++v) {
                mean += amps_[base | (v << shift)];
            }
            mean /= double(sub_dim);
            for (std::uint64_t v = 0; v < sub_dim; ++v) {
                Amp& a = amps_[base | (v << shift)];
                a = 2.0 * mean - a;
            }
        }
    }
    return *this;
}

std::vector<double> StateVector::marginal_probabilities(QubitRange range) const {
    check_range(range);
    const int shift = num_qubits_ - range.start - range.len;
    const std::uint64_t sub_mask = (1ull << range.len) - 1;
    std::vector<double> probs(1ull << range.len, 0.0);
    const std::uint64_t dim = amps_.size();
    for (std::uint64_t z = 0; z < dim; ++z) {
        probs[(z >> shift) & sub_mask] += std::norm(amps_[z]);
    }
    return probs;
}

std::uint64_t StateVector::measure(QubitRange range, Rng& rng) {
    const std::vector<double> probs = marginal_probabilities(range);
    double total = 0.0;
    for (double p : probs) total += p;
    if (total < 1e-12) throw InvariantError("measurement marginal is numerically zero");

    std::uniform_real_distribution<double> unif(0.0, total);
    const double draw = unif(rng);
    double acc = 0.0;
    std::uint64_t outcome = 0;
    bool found = false;
    std::uint64_t last_nonzero = 0;
    for (std::uint64_t v = 0; v < probs.size(); ++v) {
        if (probs[v] > 0.0) last_nonzero = v;
        acc += probs[v];
        if (!found && draw < acc) {
            outcome = v;
            found = true;
        }
    }
    if (!found) outcome = last_nonzero;

    const int shift = num_qubits_ - range.start - range.len;
    const std::uint64_t sub_mask = (1ull << range.len) - 1;
    const double scale = 1.0 / std::sqrt(probs[outcome]);
    const std::uint64_t dim = amps_.size();
    for (std::uint64_t z = 0; z < dim; ++z) {
        if (((z >> shift) & sub_mask) == outcome) {
            amps_[z] *= scale;
        } else {
            amps_[z] = Amp{};
        }
    }
    return outcome;
}

std::map<std::uint64_t, std::int64_t> StateVector::sample_counts(QubitRange range,
                                                                 std::int64_t shots,
                                                                 Rng& rng) const {
    if (shots < 1) throw DomainError("shots must be >= 1");
    const std::vector<double> probs = marginal_probabilities(range);
    std::vector<double> cdf(probs.size());
    double acc = 0.0;
    for (std::size_t v = 0; v < probs.size(); ++v) {
        acc += probs[v];
        cdf[v] = acc;
    }
    std::uniform_real_distribution<double> unif(0.0, acc);
    std::map<std::uint64_t, std::int64_t> counts;
    for (std::int64_t s = 0; s < shots; ++s) {
        const double draw = unif(rng);
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), draw);
        const std::uint64_t v = std::min<std::uint64_t>(it - cdf.begin(), probs.size() - 1);
        ++counts[v];
    }
    return counts;
}

StateVector StateVector::extract(QubitRange range) const {
    check_range(range);
    const int shift = num_qubits_ - range.start - range.len;
    const std::uint64_t sub_dim = 1ull << range.len;
    const std::uint64_t sub_mask = sub_dim - 1;
    // Locate the single basis assignment of the complement carrying all mass.
    std::uint64_t rest = 0;
    double best = -1.0;
    const std::uint64_t dim = amps_.size();
    for (std::uint64_t z = 0; z < dim; ++z) {
        const double p = std::norm(amps_[z]);
        if (p > best) {
            best = p;
            rest = z & ~(sub_mask << shift);
        }
    }
    std::vector<Amp> amps(sub_dim);
    double mass = 0.0;
    for (std::uint64_t v = 0; v < sub_dim; ++v) {
        const Amp a = amps_[rest | (v << shift)];
        amps[v] = a;
        mass += std::norm(a);
    }
    if (std::abs(mass - 1.0) > 1e-9) {
        throw InvariantError("extract: remaining qubits are entangled with the sub-register");
    }
    return from_amplitudes(range.len, std::move(amps));
}

double swap_test(const StateVector& psi, const StateVector& phi, std::int64_t shots, Rng& rng) {
    if (psi.num_qubits() != phi.num_qubits()) {
        throw DomainError("swap test requires registers of equal size");
    }
    if (shots < 1) throw DomainError("shots must be >= 1");
    const int n = psi.num_qubits();

    StateVector reg = StateVector::tensor(StateVector::tensor(StateVector::basis(1, 0), psi), phi);
    reg.apply(Gate::h(), 0);
    for (int q = 0; q < n; ++q) {
        // Controlled SWAP via three Toffolis.
        const int a = 1 + q;
        const int b = 1 + n + q;
        reg.apply_controlled(Gate::x(), {0, a}, b);
        reg.apply_controlled(Gate::x(), {0, b}, a);
        reg.apply_controlled(Gate::x(), {0, a}, b);
    }
    reg.apply(Gate::h(), 0);

    const double p1 = reg.marginal_probabilities({0, 1})[1];
    // Each shot is an independent re-preparation; a binomial draw on the exact
    // ancilla marginal reproduces the per-shot statistics.
    std::binomial_distribution<std::int64_t> binom(shots, std::clamp(p1, 0.0, 1.0));
    const std::int64_t ones = binom(rng);
    return 1.0 - 2.0 * double(ones) / double(shots);
}

namespace {

// Applies the Grover iterate (oracle then diffusion) to the trailing
// `index_qubits` of every basis state whose control bit is set.
void controlled_grover_step(std::vector<Amp>& amps, int total_qubits, int control_qubit,
                            int index_qubits, const std::vector<double>& sign) {
    const std::uint64_t cmask = 1ull << (total_qubits - 1 - control_qubit);
    const std::uint64_t sub_dim = 1ull << index_qubits;
    const std::uint64_t blocks = amps.size() >> index_qubits;
    for (std::uint64_t blk = 0; blk < blocks; ++blk) {
        const std::uint64_t base = blk << index_qubits;
        if (!(base & cmask)) continue;
        Amp mean{};
        for (std::uint64_t v = 0; v < sub_dim; ++v) {
            Amp& a = amps[base | v];
            a *= sign[v];
            mean += a;
        }
        mean /= double(sub_dim);
        for (std::uint64_t v = 0; v < sub_dim; ++v) {
            Amp& a = amps[base | v];
            a = 2.0 * mean - a;
        }
    }
}

}  // namespace

CountEstimate quantum_count(const DiagonalOracle& oracle, int index_qubits, int counting_qubits,
                            Rng& rng) {
    if (counting_qubits < 1) throw DomainError("counting register needs at least one qubit");
    if (index_qubits < 1) throw DomainError("index register needs at least one qubit");
    const int n = index_qubits + counting_qubits;
    if (n > kQubitCap) {
        throw CapacityError("counting needs " + std::to_string(n) + " qubits, cap is " +
                            std::to_string(kQubitCap));
    }

    const std::uint64_t sub_dim = 1ull << index_qubits;
    std::vector<double> sign(sub_dim);
    for (std::uint64_t v = 0; v < sub_dim; ++v) {
        const double theta = oracle(v);
        const double c = std::cos(theta);
        if (std::abs(std::abs(c) - 1.0) > 1e-9) {
            throw DomainError("counting oracle phases must lie in {0, pi}");
        }
        sign[v] = c < 0.0 ? -1.0 : 1.0;
    }

    StateVector reg = StateVector::basis(n, 0);
    for (int q = 0; q < n; ++q) reg.apply(Gate::h(), q);

    // Direct access via a copy of the amplitude vector keeps the controlled
    // Grover loop free of per-call dispatch.
    std::vector<Amp> amps(reg.amplitudes().begin(), reg.amplitudes().end());
    std::uint64_t calls = 0;
    for (int j = 0; j < counting_qubits; ++j) {
        const std::uint64_t reps = 1ull << (counting_qubits - 1 - j);
        for (std::uint64_t r = 0; r < reps; ++r) {
            controlled_grover_step(amps, n, j, index_qubits, sign);
            ++calls;
        }
    }
    reg = StateVector::from_amplitudes(n, std::move(amps));

    reg.iqft({0, counting_qubits});
    const std::uint64_t y = reg.measure({0, counting_qubits}, rng);

    const double f = double(y) / double(1ull << counting_qubits);
    const double s = std::sin(kPi * f);
    CountEstimate est;
    est.marked_estimate = double(sub_dim) * s * s;
    est.oracle_calls = calls;
    est.phase_index = y;
    est.counting_qubits = counting_qubits;
    est.index_qubits = index_qubits;
    return est;
}

double counting_error_bound(double marked, std::uint64_t search_space, int counting_qubits) {
    const double n = double(search_space);
    const double m = std::max(marked, 0.0);
    const double p = double(1ull << counting_qubits);
    return 2.0 * kPi * std::sqrt(m * n) / p + kPi * kPi * n / (p * p);
}

}  // namespace qfl::sim

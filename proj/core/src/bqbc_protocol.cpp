#include "qfl/bqbc_protocol.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace qfl::bqbc {

namespace {

constexpr double kPi = std::numbers::pi;

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

double FixedPointCode::reconstruct() const {
    double value = 0.0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) value += std::ldexp(1.0, highest_exponent - static_cast<int>(i));
    }
    return value;
}

FixedPointCode encode_fixed_point(double value, int exponent, int length) {
    if (length < 1) throw DomainError("code length must be >= 1");
    if (!(value >= 0.0) || value >= std::ldexp(1.0, exponent + 1)) {
        throw DomainError("value outside [0, 2^{exponent+1})");
    }
    FixedPointCode code;
    code.highest_exponent = exponent;
    code.bits.assign(length, 0);
    double rem = value;
    for (int i = 0; i < length; ++i) {
        const double w = std::ldexp(1.0, exponent - i);
        if (rem >= w) {
            code.bits[i] = 1;
            rem -= w;
        }
    }
    return code;
}

BitMatrix BitMatrix::zeros(int rows, int cols) {
    BitMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.bits.assign(static_cast<std::size_t>(rows) * cols, 0);
    return m;
}

std::int64_t BitMatrix::row_sum(int r) const {
    std::int64_t s = 0;
    for (int c = 0; c < cols; ++c) s += at(r, c);
    return s;
}

std::int64_t BitMatrix::total() const {
    std::int64_t s = 0;
    for (std::uint8_t b : bits) s += b;
    return s;
}

void BqbcConfig::validate() const {
    if (clients < 1) throw ConfigError("bqbc: need at least one client");
    if (!power_of_two(code_length)) throw ConfigError("bqbc: l0 must be a power of two");
    if (!power_of_two(redundancy)) throw ConfigError("bqbc: redundancy must be a power of two");
    if (epsilon <= 0.0 || epsilon >= 1.0) throw ConfigError("bqbc: epsilon outside (0, 1)");
    if (counting_qubits < 0) throw ConfigError("bqbc: counting_qubits must be >= 0");
    const int total = index_qubit_count() + 1 + counting_qubit_count();
    if (total > sim::kQubitCap) {
        throw ConfigError("bqbc: register of " + std::to_string(total) +
                          " qubits exceeds the simulator cap");
    }
}

int BqbcConfig::padded_clients() const {
    int p = 1;
    while (p < clients) p <<= 1;
    return p;
}

int BqbcConfig::index_qubit_count() const {
    return std::bit_width(static_cast<unsigned>(padded_clients() * expanded_length())) - 1;
}

int BqbcConfig::counting_qubit_count() const {
    return counting_qubits > 0 ? counting_qubits : counting_qubits_for(epsilon);
}

int counting_qubits_for(double epsilon) {
    if (epsilon <= 0.0 || epsilon >= 1.0) throw DomainError("epsilon outside (0, 1)");
    return static_cast<int>(std::ceil(std::log2(1.0 / epsilon))) + 3;
}

namespace {

// Weight bit for a flat index (k, i); rows beyond the matrix are padding zeros.
std::uint8_t flat_bit(const BitMatrix& m, int cols, std::uint64_t idx) {
    const int k = static_cast<int>(idx) / cols;
    const int i = static_cast<int>(idx) % cols;
    if (k >= m.rows) return 0;
    return m.at(k, i);
}

// X on the ancilla, pattern-controlled on the full index register.
void pattern_controlled_flip(sim::StateVector& state, int index_qubits, std::uint64_t pattern) {
    std::vector<int> controls(index_qubits);
    for (int q = 0; q < index_qubits; ++q) controls[q] = q;
    const auto x = sim::Gate::x();
    // Conjugate the zero-controls with X so the all-ones control matches `pattern`.
    for (int q = 0; q < index_qubits; ++q) {
        if (!((pattern >> (index_qubits - 1 - q)) & 1)) state.apply(x, q);
    }
    state.apply_controlled(x, controls, index_qubits);
    for (int q = 0; q < index_qubits; ++q) {
        if (!((pattern >> (index_qubits - 1 - q)) & 1)) state.apply(x, q);
    }
}

// |k,i>|c> -> |k,i>|c xor a_{ki}>; self-inverse, used to encode and decode.
void apply_weight_permutation(sim::StateVector& state, const BqbcConfig& cfg, const BitMatrix& a) {
    const int q = cfg.index_qubit_count();
    const int cols = cfg.expanded_length();
    const std::uint64_t dim = 1ull << q;
    for (std::uint64_t idx = 0; idx < dim; ++idx) {
        if (flat_bit(a, cols, idx)) pattern_controlled_flip(state, q, idx);
    }
}

}  // namespace

sim::StateVector server_prepare_index_state(const BqbcConfig& cfg, const BitMatrix& a) {
    const int q = cfg.index_qubit_count();
    if (q + 1 > sim::kQubitCap) throw CapacityError("bqbc index register exceeds the cap");
    sim::StateVector state = sim::StateVector::basis(q + 1, 0);
    const auto h = sim::Gate::h();
    for (int i = 0; i < q; ++i) state.apply(h, i);
    apply_weight_permutation(state, cfg, a);
    return state;
}

bool client_verify_uniform(sim::StateVector state, const BqbcConfig& cfg, const BitMatrix& a,
                           Rng& rng) {
    const int q = cfg.index_qubit_count();
    apply_weight_permutation(state, cfg, a);
    const auto h = sim::Gate::h();
    for (int i = 0; i < q; ++i) state.apply(h, i);
    return state.measure({0, q}, rng) == 0;
}

sim::StateVector client_phase_encode(sim::StateVector state, const BqbcConfig& cfg, int client,
                                     std::span<const std::uint8_t> b_row, int pad_bit) {
    if (client < 0 || client >= cfg.clients) throw DomainError("client index out of range");
    const int cols = cfg.expanded_length();
    if (b_row.size() != static_cast<std::size_t>(cols)) {
        throw DomainError("gradient code length mismatch");
    }
    const int q = cfg.index_qubit_count();
    const std::uint64_t lo = static_cast<std::uint64_t>(client) * cols;
    const std::uint64_t hi = lo + cols;
    state.apply_diagonal(
        [&](std::uint64_t z) -> double {
            const std::uint64_t idx = z >> 1;
            if (idx < lo || idx >= hi) return 0.0;
            const int anc = static_cast<int>(z & 1);
            if (anc) return b_row[idx - lo] ? kPi : 0.0;
            return pad_bit ? kPi : 0.0;
        },
        {0, q + 1});
    return state;
}

RedundantCode redundant_encode(const BitMatrix& a, const BitMatrix& b, int r,
                               std::span<const std::uint8_t> method_flags, Rng& rng) {
    if (r < 1) throw DomainError("redundancy must be >= 1");
    if (a.rows != b.rows || a.cols != b.cols) throw DomainError("code shape mismatch");
    if (method_flags.size() != static_cast<std::size_t>(a.rows)) {
        throw DomainError("one method flag per client required");
    }
    RedundantCode code;
    code.r = r;
    code.a = BitMatrix::zeros(a.rows, a.cols * r);
    code.b = BitMatrix::zeros(b.rows, b.cols * r);
    code.method_flags.assign(method_flags.begin(), method_flags.end());
    std::uniform_int_distribution<int> pos(0, r - 1);
    for (int k = 0; k < a.rows; ++k) {
        for (int i = 0; i < a.cols; ++i) {
            const int secret = pos(rng);  // R_{ki}
            for (int j = 0; j < r; ++j) {
                code.a.at(k, i * r + j) = a.at(k, i);
                if (method_flags[k]) {
                    // Ones elsewhere: (1 - delta) + delta b.
                    code.b.at(k, i * r + j) = j == secret ? b.at(k, i) : 1;
                } else {
                    // Zeros elsewhere: delta b.
                    code.b.at(k, i * r + j) = j == secret ? b.at(k, i) : 0;
                }
            }
        }
    }
    return code;
}

RedundantCode redundant_encode(const BitMatrix& a, const BitMatrix& b, int r, Rng& rng) {
    std::vector<std::uint8_t> flags(a.rows);
    std::uniform_int_distribution<int> coin(0, 1);
    for (auto& f : flags) f = static_cast<std::uint8_t>(coin(rng));
    return redundant_encode(a, b, r, flags, rng);
}

double redundant_reconcile(double raw_marked, std::span<const std::uint8_t> method_flags,
                           const BitMatrix& a_original, int r) {
    if (method_flags.size() != static_cast<std::size_t>(a_original.rows)) {
        throw DomainError("one method flag per client required");
    }
    double corrected = raw_marked;
    for (int k = 0; k < a_original.rows; ++k) {
        if (method_flags[k]) corrected -= double(r - 1) * double(a_original.row_sum(k));
    }
    return corrected;
}

LeakProbability leak_probability(int r, int m, int l0, double epsilon) {
    if (r < 1 || m < 1 || l0 < 1 || epsilon <= 0.0) {
        throw DomainError("leak probability arguments must be positive");
    }
    const double denom = double(r) * double(m) * double(l0) * epsilon;
    LeakProbability p;
    p.value = 1.0 / denom;
    if (p.value > 1.0) {
        p.value = 1.0;
        p.clamped = true;
    }
    return p;
}

namespace {

struct PreparedRun {
    RedundantCode code;
    std::vector<int> pads;  // one {0,1} phase pad per real client
};

PreparedRun prepare_run(const BqbcConfig& cfg, const BitMatrix& a, const BitMatrix& b, Rng& rng) {
    PreparedRun run;
    if (cfg.redundancy > 1) {
        run.code = redundant_encode(a, b, cfg.redundancy, rng);
    } else {
        run.code.r = 1;
        run.code.a = a;
        run.code.b = b;
        run.code.method_flags.assign(a.rows, 0);
    }
    run.pads.assign(cfg.clients, 0);
    if (cfg.phase_padding) {
        std::uniform_int_distribution<int> coin(0, 1);
        for (int& p : run.pads) p = coin(rng);
    }
    return run;
}

// The compiled ring pass: ancilla encode, per-client phases, ancilla decode
// collapse to a single diagonal on the index register.
sim::DiagonalOracle compiled_oracle(const BqbcConfig& cfg, const PreparedRun& run) {
    const int cols = cfg.expanded_length();
    const RedundantCode& code = run.code;
    std::vector<int> pads = run.pads;
    return [cols, code, pads](std::uint64_t idx) -> double {
        const int k = static_cast<int>(idx) / cols;
        const int i = static_cast<int>(idx) % cols;
        if (k >= code.a.rows) return 0.0;  // padding rows never mark
        const int a = code.a.at(k, i);
        const int b = code.b.at(k, i);
        const int pad = k < static_cast<int>(pads.size()) ? pads[k] : 0;
        const int marked = (a & b) ^ (pad & (a ^ 1));
        return marked ? kPi : 0.0;
    };
}

}  // namespace

EstimateResult run_estimate(channel::Ledger& ledger, const BqbcConfig& cfg, const BitMatrix& a,
                            const BitMatrix& b, std::int64_t round, Rng& rng) {
    cfg.validate();
    if (a.rows != cfg.clients || b.rows != cfg.clients || a.cols != cfg.code_length ||
        b.cols != cfg.code_length) {
        throw DomainError("code matrices must be clients x l0");
    }
    const int m = cfg.clients;
    const int l0 = cfg.code_length;
    const int q = cfg.index_qubit_count();
    const int t = cfg.counting_qubit_count();
    const int width = q + 1;
    const std::uint64_t search_space = 1ull << q;

    PreparedRun run = prepare_run(cfg, a, b, rng);

    const auto server = channel::PartyId::make_server();
    // Uniformity check: the server supplies fresh verification states which
    // the first client consumes.
    for (int v = 0; v < cfg.verification_rounds; ++v) {
        sim::StateVector vstate = server_prepare_index_state(cfg, run.code.a);
        vstate = channel::send_quantum(ledger, server, channel::PartyId::client(0),
                                       std::move(vstate), "bqbc-verify", round);
        if (!client_verify_uniform(std::move(vstate), cfg, run.code.a, rng)) {
            throw ProtocolAbort("bqbc: honest verification state failed the uniformity check");
        }
    }

    const sim::DiagonalOracle oracle = compiled_oracle(cfg, run);
    const std::uint64_t calls = (1ull << t) - 1;

    EstimateResult result;
    result.exact = cfg.exact_counting;
    result.oracle_calls = calls;
    result.register_width = width;
    if (cfg.exact_counting) {
        std::int64_t marked = 0;
        for (std::uint64_t idx = 0; idx < search_space; ++idx) {
            if (oracle(idx) > 1.0) ++marked;
        }
        result.raw_marked = double(marked);
    } else {
        const sim::CountEstimate est = sim::quantum_count(oracle, q, t, rng);
        result.raw_marked = est.marked_estimate;
    }

    // Each controlled oracle call is one ring pass of the travelling register:
    // server -> client 1 -> ... -> client m -> server.
    const std::int64_t pass_qubits = static_cast<std::int64_t>(calls) * width;
    channel::send_qubits(ledger, server, channel::PartyId::client(0), pass_qubits, "bqbc", round);
    for (int k = 0; k + 1 < m; ++k) {
        channel::send_qubits(ledger, channel::PartyId::client(k), channel::PartyId::client(k + 1),
                             pass_qubits, "bqbc", round);
    }
    channel::send_qubits(ledger, channel::PartyId::client(m - 1), server, pass_qubits, "bqbc",
                         round);

    // End-of-run disclosures.
    double corrected = result.raw_marked;
    if (cfg.phase_padding) {
        const int expanded = cfg.expanded_length();
        for (int k = 0; k < m; ++k) {
            channel::send_classical(ledger, channel::PartyId::client(k), server, 1, "bqbc", round);
            if (run.pads[k]) {
                corrected -= double(expanded) - double(run.code.a.row_sum(k));
            }
        }
    }
    if (cfg.redundancy > 1) {
        for (int k = 0; k < m; ++k) {
            channel::send_classical(ledger, channel::PartyId::client(k), server, 1, "bqbc", round);
        }
        corrected = redundant_reconcile(corrected, run.code.method_flags, a, cfg.redundancy);
    }

    result.marked_estimate = corrected;
    result.mean_estimate = corrected / (double(m) * double(l0));
    result.mean_error_bound =
        sim::counting_error_bound(std::max(corrected, 0.0), search_space, t) /
        (double(m) * double(l0));
    return result;
}

ConvolutionResult weighted_sum_via_convolution(channel::Ledger& ledger, const BqbcConfig& cfg,
                                               std::span<const double> weights,
                                               std::span<const double> gradients,
                                               int weight_exponent, int gradient_exponent,
                                               std::int64_t round, Rng& rng) {
    cfg.validate();
    const int m = cfg.clients;
    const int l0 = cfg.code_length;
    if (weights.size() != static_cast<std::size_t>(m) || gradients.size() != weights.size()) {
        throw DomainError("need one weight and one gradient per client");
    }

    BitMatrix a = BitMatrix::zeros(m, l0);
    BitMatrix b = BitMatrix::zeros(m, l0);
    for (int k = 0; k < m; ++k) {
        const FixedPointCode wc = encode_fixed_point(weights[k], weight_exponent, l0);
        const FixedPointCode gc = encode_fixed_point(gradients[k], gradient_exponent, l0);
        for (int i = 0; i < l0; ++i) {
            a.at(k, i) = wc.bits[i];
            b.at(k, i) = gc.bits[i];
        }
    }

    // Geometric split of the error budget across shifts; the weight of shift
    // lambda is 2^{u+v-lambda}, so later shifts may be estimated more loosely.
    double inv_split = 0.0;
    const int shifts = 2 * l0 - 1;
    for (int lam = 0; lam < shifts; ++lam) inv_split += std::pow(2.0, -0.5 * lam);
    const double base_eps =
        cfg.epsilon /
        (std::ldexp(1.0, weight_exponent + gradient_exponent) * m * l0 * inv_split);

    ConvolutionResult out;
    for (int lam = 0; lam < shifts; ++lam) {
        BitMatrix shifted = BitMatrix::zeros(m, l0);
        for (int k = 0; k < m; ++k) {
            for (int i = 0; i < l0; ++i) {
                const int j = lam - i;
                if (j >= 0 && j < l0) shifted.at(k, i) = b.at(k, j);
            }
        }
        BqbcConfig sub = cfg;
        if (cfg.counting_qubits == 0) {
            const double eps_lam = std::min(0.5, base_eps * std::pow(2.0, 0.5 * lam));
            sub.counting_qubits = counting_qubits_for(eps_lam);
        }
        const EstimateResult est = run_estimate(ledger, sub, a, shifted, round, rng);
        const double scale = std::ldexp(1.0, weight_exponent + gradient_exponent - lam);
        out.value += scale * est.marked_estimate;
        if (!cfg.exact_counting) {
            out.counting_error_bound += scale * est.mean_error_bound * double(m) * double(l0);
        }
    }
    // Truncating each operand to l0 bits costs at most 2^{exp - l0 + 1} per
    // value, amplified by the partner's magnitude.
    out.encoding_error_bound =
        double(m) * (std::ldexp(1.0, gradient_exponent + 1 + weight_exponent - l0 + 1) +
                     std::ldexp(1.0, weight_exponent + 1 + gradient_exponent - l0 + 1));
    return out;
}

AttackDemoResult malicious_server_attack_demo(const BqbcConfig& cfg, int target_client,
                                              int target_bit, int trials, Rng& rng,
                                              bool honest_server) {
    cfg.validate();
    if (trials < 1) throw DomainError("trials must be >= 1");
    if (target_client < 0 || target_client >= cfg.clients || target_bit < 0 ||
        target_bit >= cfg.code_length) {
        throw DomainError("attack target out of range");
    }
    const int q = cfg.index_qubit_count();

    // The server aims at the first expanded digit of the target bit.
    const std::uint64_t target_idx =
        static_cast<std::uint64_t>(target_client) * cfg.expanded_length() +
        static_cast<std::uint64_t>(target_bit) * cfg.redundancy;
    const auto make_probe = [&]() {
        sim::StateVector probe = sim::StateVector::basis(q + 1, target_idx << 1);
        probe.apply(sim::Gate::h(), q);  // superposed ancilla as the phase reference
        return probe;
    };

    std::uniform_int_distribution<int> coin(0, 1);
    AttackDemoResult out;
    std::int64_t detected = 0;
    std::int64_t evaded = 0;
    std::int64_t leaked = 0;
    for (int trial = 0; trial < trials; ++trial) {
        BitMatrix a = BitMatrix::zeros(cfg.clients, cfg.code_length);
        BitMatrix b = BitMatrix::zeros(cfg.clients, cfg.code_length);
        for (auto& bit : a.bits) bit = static_cast<std::uint8_t>(coin(rng));
        for (auto& bit : b.bits) bit = static_cast<std::uint8_t>(coin(rng));
        PreparedRun run = prepare_run(cfg, a, b, rng);

        // Verification pass: the honest server sends the uniform state, the
        // malicious one a register concentrated on the target index.
        sim::StateVector vstate = honest_server ? server_prepare_index_state(cfg, run.code.a)
                                                : make_probe();
        if (!client_verify_uniform(std::move(vstate), cfg, run.code.a, rng)) {
            ++detected;
            continue;
        }
        if (honest_server) continue;
        ++evaded;

        // Working pass on a fresh probe: ring of phase encodings, then the
        // server reads the ancilla in the X basis and uses the outcome as its
        // guess for the original bit b_{k*i*}.
        sim::StateVector probe = make_probe();
        for (int k = 0; k < cfg.clients; ++k) {
            std::span<const std::uint8_t> row{
                run.code.b.bits.data() + static_cast<std::size_t>(k) * run.code.b.cols,
                static_cast<std::size_t>(run.code.b.cols)};
            probe = client_phase_encode(std::move(probe), cfg, k, row, run.pads[k]);
        }
        probe.apply(sim::Gate::h(), q);
        const std::uint64_t read = probe.measure({q, 1}, rng);
        if (static_cast<std::uint8_t>(read) == b.at(target_client, target_bit)) ++leaked;
    }
    out.detection_rate = double(detected) / double(trials);
    out.evaded_trials = evaded;
    out.leaked_bit_success_rate = evaded > 0 ? double(leaked) / double(evaded) : 0.0;
    return out;
}

}  // namespace qfl::bqbc

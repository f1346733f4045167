#include "qfl/incremental.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace qfl::incremental {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    return r;
}

}  // namespace

void GhzConfig::validate() const {
    if (clients < 1) throw ConfigError("ghz: need at least one client");
    if (clients + 1 > sim::kQubitCap) throw ConfigError("ghz: clients + 1 exceeds the qubit cap");
    if (shots_per_quadrature < 1) throw ConfigError("ghz: shots_per_quadrature must be >= 1");
}

sim::StateVector ghz_prepare(int clients) {
    if (clients < 1) throw DomainError("ghz: need at least one client");
    if (clients + 1 > sim::kQubitCap) throw CapacityError("ghz: register exceeds the qubit cap");
    sim::StateVector state = sim::StateVector::basis(clients + 1, 0);
    state.apply(sim::Gate::h(), 0);
    for (int k = 1; k <= clients; ++k) state.apply_controlled(sim::Gate::x(), {0}, k);
    return state;
}

void ghz_client_encode(sim::StateVector& state, int client, double weighted_gradient) {
    const int qubit = client + 1;
    if (client < 0 || qubit >= state.num_qubits()) throw DomainError("ghz: client out of range");
    state.apply(sim::Gate::phase(-weighted_gradient), qubit);
}

namespace {

// Disentangle and verify; leaves the server qubit carrying the phase.
void ghz_fan_in(sim::StateVector& state, int clients) {
    for (int k = 1; k <= clients; ++k) state.apply_controlled(sim::Gate::x(), {0}, k);
}

void ghz_quadrature_rotation(sim::StateVector& state, Quadrature quadrature) {
    // X: H. Y: S then H, so that P(0) = (1 + sin Phi)/2 for a branch phase
    // e^{-i Phi}.
    if (quadrature == Quadrature::Y) state.apply(sim::Gate::s(), 0);
    state.apply(sim::Gate::h(), 0);
}

}  // namespace

int ghz_decode_shot(sim::StateVector state, int clients, Quadrature quadrature, Rng& rng) {
    if (state.num_qubits() != clients + 1) throw DomainError("ghz: register width mismatch");
    ghz_fan_in(state, clients);
    if (state.measure({1, clients}, rng) != 0) {
        throw ProtocolAbort("ghz: clients' register not all |0> after fan-in");
    }
    ghz_quadrature_rotation(state, quadrature);
    return static_cast<int>(state.measure({0, 1}, rng));
}

namespace {

struct QuadratureProbs {
    double p0x = 0.0;
    double p0y = 0.0;
};

// Exact P(0) of both quadratures for the encoded state. Throws if the
// clients' register is not exactly disentangled to |0...0>.
QuadratureProbs ghz_exact_readout(sim::StateVector state, int clients) {
    ghz_fan_in(state, clients);
    const std::vector<double> client_marginal = state.marginal_probabilities({1, clients});
    if (std::abs(client_marginal[0] - 1.0) > 1e-9) {
        throw ProtocolAbort("ghz: clients' register not all |0> after fan-in");
    }
    QuadratureProbs probs;
    sim::StateVector x_state = state;
    ghz_quadrature_rotation(x_state, Quadrature::X);
    probs.p0x = x_state.marginal_probabilities({0, 1})[0];
    ghz_quadrature_rotation(state, Quadrature::Y);
    probs.p0y = state.marginal_probabilities({0, 1})[0];
    return probs;
}

PhaseEstimate ramsey_estimate(const QuadratureProbs& probs, std::int64_t shots_per_quadrature,
                              Rng& rng) {
    std::binomial_distribution<std::int64_t> bx(shots_per_quadrature, probs.p0x);
    std::binomial_distribution<std::int64_t> by(shots_per_quadrature, probs.p0y);
    const double fx = double(bx(rng)) / double(shots_per_quadrature);
    const double fy = double(by(rng)) / double(shots_per_quadrature);
    const double c = 2.0 * fx - 1.0;
    const double s = 2.0 * fy - 1.0;

    PhaseEstimate est;
    est.angle = wrap_angle(std::atan2(s, c));
    est.shots_used = 2 * shots_per_quadrature;
    const double r2 = std::max(c * c + s * s, 1e-6);
    const double var_c = 4.0 * std::max(fx * (1.0 - fx), 0.25 / double(shots_per_quadrature)) /
                         double(shots_per_quadrature);
    const double var_s = 4.0 * std::max(fy * (1.0 - fy), 0.25 / double(shots_per_quadrature)) /
                         double(shots_per_quadrature);
    est.std_error = std::sqrt((c * c * var_s + s * s * var_c) / (r2 * r2));
    return est;
}

}  // namespace

PhaseEstimate ghz_estimate_sum(channel::Ledger& ledger, const GhzConfig& cfg,
                               std::span<const double> weighted_gradients, std::int64_t round,
                               Rng& rng) {
    cfg.validate();
    if (weighted_gradients.size() != static_cast<std::size_t>(cfg.clients)) {
        throw DomainError("ghz: one gradient per client required");
    }
    sim::StateVector state = ghz_prepare(cfg.clients);
    for (int k = 0; k < cfg.clients; ++k) ghz_client_encode(state, k, weighted_gradients[k]);

    // One GHZ copy per shot: every client qubit travels out and back. Charged
    // as per-client aggregates over all shots of both quadratures.
    const std::int64_t total_shots = 2 * cfg.shots_per_quadrature;
    const auto server = channel::PartyId::make_server();
    const channel::PartyId distributor = cfg.distributor == Distributor::Server
                                             ? server
                                             : channel::PartyId::client(0);
    for (int k = 0; k < cfg.clients; ++k) {
        const auto client = channel::PartyId::client(k);
        if (!(distributor == client)) {
            channel::send_qubits(ledger, distributor, client, total_shots, "ghz", round);
        } else {
            // The trusted distributor ships the server qubit instead of its own.
            channel::send_qubits(ledger, distributor, server, total_shots, "ghz", round);
        }
        channel::send_qubits(ledger, client, server, total_shots, "ghz", round);
    }

    const QuadratureProbs probs = ghz_exact_readout(std::move(state), cfg.clients);
    return ramsey_estimate(probs, cfg.shots_per_quadrature, rng);
}

std::int64_t ghz_cost(const GhzConfig& cfg, std::int64_t d) {
    return 2 * (2 * cfg.shots_per_quadrature) * cfg.clients * d;
}

PairingAttackResult ghz_malicious_pairing_demo(const GhzConfig& cfg,
                                               std::span<const double> weighted_gradients,
                                               int target, Rng& rng) {
    cfg.validate();
    if (cfg.distributor != Distributor::Server) {
        throw ConfigError("ghz: pairing attack unavailable under trusted-client distribution");
    }
    if (weighted_gradients.size() != static_cast<std::size_t>(cfg.clients)) {
        throw DomainError("ghz: one gradient per client required");
    }
    if (target < 0 || target >= cfg.clients) throw DomainError("ghz: target out of range");

    // Server-forged distribution: Bell pair with the target, |+> elsewhere.
    sim::StateVector state = sim::StateVector::basis(cfg.clients + 1, 0);
    state.apply(sim::Gate::h(), 0);
    state.apply_controlled(sim::Gate::x(), {0}, target + 1);
    for (int k = 0; k < cfg.clients; ++k) {
        if (k != target) state.apply(sim::Gate::h(), k + 1);
    }
    // Clients behave honestly.
    for (int k = 0; k < cfg.clients; ++k) ghz_client_encode(state, k, weighted_gradients[k]);

    // Pair readout: disentangle only the target, Ramsey-read the server qubit.
    state.apply_controlled(sim::Gate::x(), {0}, target + 1);
    QuadratureProbs probs;
    sim::StateVector x_state = state;
    ghz_quadrature_rotation(x_state, Quadrature::X);
    probs.p0x = x_state.marginal_probabilities({0, 1})[0];
    ghz_quadrature_rotation(state, Quadrature::Y);
    probs.p0y = state.marginal_probabilities({0, 1})[0];
    const PhaseEstimate est = ramsey_estimate(probs, cfg.shots_per_quadrature, rng);

    PairingAttackResult out;
    out.recovered = est.angle;
    out.truth = wrap_angle(weighted_gradients[target]);
    out.abs_error = std::abs(std::remainder(out.recovered - out.truth, kTwoPi));
    return out;
}

// ---------------------------------------------------------------------------

void SmsConfig::validate() const {
    if (clients < 1) throw ConfigError("sms: need at least one client");
    if (phase_bits < 1) throw ConfigError("sms: phase_bits must be >= 1");
    if (2 * phase_bits > sim::kQubitCap) {
        throw ConfigError("sms: 2 * phase_bits exceeds the qubit cap");
    }
    if (repetitions < 1) throw ConfigError("sms: repetitions must be >= 1");
}

double SmsConfig::delta() const { return kTwoPi / double(1ull << phase_bits); }

std::uint64_t sms_quantize(double gradient, int phase_bits) {
    if (!std::isfinite(gradient)) throw DomainError("sms: gradient must be finite");
    const std::uint64_t dim = 1ull << phase_bits;
    const double delta = kTwoPi / double(dim);
    const double wrapped = wrap_angle(gradient);
    const auto g = static_cast<std::uint64_t>(std::llround(wrapped / delta));
    return g & (dim - 1);
}

sim::StateVector sms_initial_state(std::uint64_t g1, int phase_bits) {
    const int h = phase_bits;
    const std::uint64_t dim = 1ull << h;
    if (g1 >= dim) throw DomainError("sms: quantized gradient out of range");
    if (2 * h > sim::kQubitCap) throw CapacityError("sms: register exceeds the qubit cap");
    sim::StateVector state = sim::StateVector::basis(2 * h, g1 << h);
    state.qft({0, h});
    for (int j = 0; j < h; ++j) state.apply_controlled(sim::Gate::x(), {j}, h + j);
    return state;
}

void sms_client_accumulate(sim::StateVector& state, std::uint64_t g_k, int phase_bits) {
    const int h = phase_bits;
    if (state.num_qubits() != 2 * h) throw DomainError("sms: register width mismatch");
    // e^{2 pi i g l / 2^h} accumulated bit by bit on the travelling ancilla;
    // the client's own register never entangles with the ring.
    for (int j = 0; j < h; ++j) {
        const double theta = kTwoPi * double(g_k) * double(1ull << (h - 1 - j)) / double(1ull << h);
        state.apply(sim::Gate::phase(theta), h + j);
    }
}

sim::StateVector sms_verify_and_release(sim::StateVector state, int phase_bits, Rng& rng) {
    const int h = phase_bits;
    if (state.num_qubits() != 2 * h) throw DomainError("sms: register width mismatch");
    for (int j = 0; j < h; ++j) state.apply_controlled(sim::Gate::x(), {j}, h + j);
    if (state.measure({h, h}, rng) != 0) {
        throw TamperDetected("sms: ancilla register did not uncompute to zero");
    }
    return state.extract({0, h});
}

std::uint64_t sms_server_decode(sim::StateVector state, Rng& rng) {
    const int h = state.num_qubits();
    state.iqft({0, h});
    return state.measure({0, h}, rng);
}

SmsRunResult sms_run(channel::Ledger& ledger, const SmsConfig& cfg,
                     std::span<const double> gradients, std::int64_t round, Rng& rng) {
    cfg.validate();
    if (gradients.size() != static_cast<std::size_t>(cfg.clients)) {
        throw DomainError("sms: one gradient per client required");
    }
    const int h = cfg.phase_bits;
    const int m = cfg.clients;
    std::vector<std::uint64_t> g(m);
    for (int k = 0; k < m; ++k) g[k] = sms_quantize(gradients[k], h);

    const auto server = channel::PartyId::make_server();
    std::map<std::uint64_t, int> votes;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        sim::StateVector state = sms_initial_state(g[0], h);
        for (int k = 1; k < m; ++k) {
            channel::send_qubits(ledger, channel::PartyId::client(k - 1),
                                 channel::PartyId::client(k), h, "sms", round);
            sms_client_accumulate(state, g[k], h);
        }
        // Ancilla returns to the first client, the released register moves on
        // to the server. A single-client ring degenerates to the upload alone.
        if (m > 1) {
            channel::send_qubits(ledger, channel::PartyId::client(m - 1),
                                 channel::PartyId::client(0), h, "sms", round);
        } else {
            channel::send_qubits(ledger, channel::PartyId::client(0), server, h, "sms", round);
        }
        sim::StateVector released = sms_verify_and_release(std::move(state), h, rng);
        channel::send_qubits(ledger, channel::PartyId::client(0), server, h, "sms", round);
        ++votes[sms_server_decode(std::move(released), rng)];
    }

    SmsRunResult out;
    int best = 0;
    for (const auto& [value, count] : votes) {
        if (count > best) {
            best = count;
            out.decoded_sum = value;
        }
    }
    out.estimate.angle = wrap_angle(double(out.decoded_sum) * cfg.delta());
    out.estimate.std_error = double(m) * cfg.delta() / 2.0;
    out.estimate.shots_used = cfg.repetitions;
    return out;
}

std::int64_t sms_cost(const SmsConfig& cfg, std::int64_t d) {
    return std::int64_t(cfg.clients + 1) * d * cfg.phase_bits * cfg.repetitions;
}

SmsAttackStats sms_attack_demo(const SmsConfig& cfg, SmsAttack attack, int attacker, int trials,
                               Rng& rng) {
    cfg.validate();
    if (attacker < 1 || attacker >= cfg.clients) {
        throw DomainError("sms: attacker must be a mid-ring client");
    }
    if (trials < 1) throw DomainError("sms: trials must be >= 1");
    const int h = cfg.phase_bits;
    std::uniform_int_distribution<std::uint64_t> pick(0, (1ull << h) - 1);

    std::int64_t detected = 0;
    for (int trial = 0; trial < trials; ++trial) {
        sim::StateVector state = sms_initial_state(pick(rng), h);
        for (int k = 1; k < cfg.clients; ++k) {
            sms_client_accumulate(state, pick(rng), h);
            if (k == attacker) {
                if (attack == SmsAttack::InverseQftMidRing) {
                    // Extraction attempt: rotate the ancilla into the Fourier
                    // frame and read the accumulated phase.
                    state.iqft({h, h});
                    state.measure({h, h}, rng);
                } else {
                    state.measure({h, h}, rng);
                }
            }
        }
        try {
            sms_verify_and_release(std::move(state), h, rng);
        } catch (const TamperDetected&) {
            ++detected;
        }
    }
    return {double(detected) / double(trials), trials};
}

}  // namespace qfl::incremental

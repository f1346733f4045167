#include "qfl/css_protocol.hpp"

#include <cmath>

namespace qfl::css {

namespace {

using u128 = unsigned __int128;
using i128 = __int128;

std::uint64_t modulus_mask(const CssConfig& cfg) {
    return cfg.log2_modulus == 64 ? ~0ull : (1ull << cfg.log2_modulus) - 1;
}

// round(a / b) for b > 0, exact in integers.
i128 div_round(i128 a, i128 b) {
    const bool neg = a < 0;
    const i128 mag = neg ? -a : a;
    const i128 q = (2 * mag + b) / (2 * b);
    return neg ? -q : q;
}

std::int64_t quantize(double grad, const CssConfig& cfg) {
    if (!std::isfinite(grad)) throw DomainError("gradient must be finite");
    if (std::abs(grad) > cfg.gradient_bound) {
        throw DomainError("gradient exceeds the public bound used for masking");
    }
    return std::llround(std::ldexp(grad, cfg.fraction_bits));
}

}  // namespace

void CssConfig::validate() const {
    if (clients < 1) throw ConfigError("css: need at least one client");
    if (log2_modulus < 32 || log2_modulus > 64) throw ConfigError("css: log2_modulus outside [32, 64]");
    if (fraction_bits < 1 || fraction_bits > 52) throw ConfigError("css: fraction_bits outside [1, 52]");
    if (exact_pad_bits < 1 || exact_pad_bits > 40) throw ConfigError("css: exact_pad_bits outside [1, 40]");
    if (gradient_bound <= 0.0) throw ConfigError("css: gradient_bound must be positive");
}

PadMatrix sample_pads(int m, const CssConfig& cfg, Rng& rng) {
    PadMatrix pads;
    pads.m = m;
    pads.s.assign(static_cast<std::size_t>(m) * m, 0);
    const std::uint64_t mask = modulus_mask(cfg);
    std::uniform_int_distribution<std::uint64_t> unif(0, mask);
    for (int i = 0; i < m; ++i) {
        for (int k = 0; k < m; ++k) {
            if (i != k) pads.at(i, k) = unif(rng);
        }
    }
    return pads;
}

PadMatrix compute_perturbations(const PadMatrix& pads, const CssConfig& cfg) {
    const std::uint64_t mask = modulus_mask(cfg);
    PadMatrix p;
    p.m = pads.m;
    p.s.assign(pads.s.size(), 0);
    for (int i = 0; i < pads.m; ++i) {
        for (int k = 0; k < pads.m; ++k) {
            if (i == k) continue;
            p.at(i, k) = (pads.at(i, k) - pads.at(k, i)) & mask;
        }
    }
    return p;
}

std::uint64_t mask_gradient(double grad, fl::ClientWeight weight,
                            std::span<const std::uint64_t> p_row, const CssConfig& cfg) {
    if (weight.samples <= 0 || weight.total <= 0) {
        throw DomainError("client weight must be positive");
    }
    const std::uint64_t mask = modulus_mask(cfg);
    // Keep the row sum unreduced: scaling a reduced sum by a non-integral
    // 1/w_i would ripple the marginal; the unreduced sum telescopes the same
    // way (pair sums are exact multiples of R) and mixes across periods.
    u128 pad_sum = 0;
    for (std::uint64_t p : p_row) pad_sum += p;
    // (1/w_i) sum_k p_{i,k} = total/samples * pad_sum, rounded, then reduced.
    const u128 scaled = pad_sum * u128(weight.total);
    const u128 rounded = (2 * scaled + u128(weight.samples)) / (2 * u128(weight.samples));
    const std::uint64_t mask_term = static_cast<std::uint64_t>(rounded) & mask;
    const std::uint64_t g = static_cast<std::uint64_t>(quantize(grad, cfg));
    return (g + mask_term) & mask;
}

double server_aggregate_classical(std::span<const std::uint64_t> masked,
                                  std::span<const fl::ClientWeight> weights,
                                  const CssConfig& cfg) {
    if (masked.size() != weights.size()) throw DomainError("one masked value per client required");
    const std::uint64_t mask = modulus_mask(cfg);
    std::int64_t total = 0;
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < masked.size(); ++i) {
        // N_i * y_i (mod R); the weighted sum is (1/N) sum_i N_i y_i.
        const u128 term = u128(weights[i].samples) * u128(masked[i]);
        acc = (acc + static_cast<std::uint64_t>(term & u128(mask))) & mask;
        total = weights[i].total;
    }
    // Interpret the residue as a signed value centered on zero.
    const std::uint64_t half = 1ull << (cfg.log2_modulus - 1);
    double value;
    if (acc < half) {
        value = double(acc);
    } else {
        value = -double((mask - acc) + 1);
    }
    return std::ldexp(value / double(total), -cfg.fraction_bits);
}

SignedPads sample_exact_perturbations(int m, const CssConfig& cfg, Rng& rng) {
    std::uniform_int_distribution<std::int64_t> unif(0, (std::int64_t(1) << cfg.exact_pad_bits) - 1);
    std::vector<std::int64_t> s(static_cast<std::size_t>(m) * m, 0);
    for (int i = 0; i < m; ++i) {
        for (int k = 0; k < m; ++k) {
            if (i != k) s[static_cast<std::size_t>(i) * m + k] = unif(rng);
        }
    }
    SignedPads pads;
    pads.m = m;
    pads.p.assign(s.size(), 0);
    for (int i = 0; i < m; ++i) {
        for (int k = 0; k < m; ++k) {
            if (i == k) continue;
            pads.p[static_cast<std::size_t>(i) * m + k] =
                s[static_cast<std::size_t>(i) * m + k] - s[static_cast<std::size_t>(k) * m + i];
        }
    }
    return pads;
}

std::int64_t mask_gradient_exact(double grad, fl::ClientWeight weight,
                                 std::span<const std::int64_t> p_row, const CssConfig& cfg) {
    if (weight.samples <= 0 || weight.total <= 0) {
        throw DomainError("client weight must be positive");
    }
    i128 pad_sum = 0;
    for (std::int64_t p : p_row) pad_sum += p;
    const i128 mask_term = div_round(pad_sum * i128(weight.total), i128(weight.samples));
    return quantize(grad, cfg) + static_cast<std::int64_t>(mask_term);
}

std::int64_t public_offset(fl::ClientWeight weight, const CssConfig& cfg) {
    // |mask| <= (total/samples) (m-1) (2^pad - 1) and |g| <= 2^f bound; both
    // bounds are public, so the shift leaks nothing.
    // The caller supplies m through the weight-independent pad bound below.
    const i128 pad_peak = (i128(1) << cfg.exact_pad_bits) - 1;
    const i128 pad_bound = div_round(pad_peak * i128(cfg.clients - 1) * i128(weight.total),
                                     i128(weight.samples)) +
                           1;
    const std::int64_t grad_bound =
        static_cast<std::int64_t>(std::ceil(std::ldexp(cfg.gradient_bound, cfg.fraction_bits))) + 1;
    return static_cast<std::int64_t>(pad_bound) + grad_bound;
}

CostTotals cost_classical(const CssConfig& cfg, std::int64_t d) {
    const std::int64_t m = cfg.clients;
    const std::int64_t w = cfg.word_bits;
    CostTotals t;
    t.classical_bits = m * (m - 1) * d * w + m * d * w;
    return t;
}

CostTotals cost_quantum(const CssConfig& cfg, std::int64_t d, std::int64_t shots_per_parameter) {
    const std::int64_t m = cfg.clients;
    const std::int64_t w = cfg.word_bits;
    int index_qubits = 1;  // ceil(log2 m), floor of one qubit for m = 1
    while ((1ll << index_qubits) < m) ++index_qubits;
    CostTotals t;
    // Pads, masked-value collection at the designated client, and the N_c
    // disclosure; the collection plus disclosure add up to m words per
    // parameter, mirroring the classical upload term.
    t.classical_bits = m * (m - 1) * d * w + (m - 1) * d * w + d * w;
    t.qubits = d * shots_per_parameter * index_qubits;
    return t;
}

AmplitudeEncoding amplitude_encode_masked(std::span<const double> values) {
    if (values.empty()) throw DomainError("cannot encode an empty vector");
    double norm_sq = 0.0;
    for (double v : values) norm_sq += v * v;
    if (norm_sq <= 0.0) throw DomainError("cannot amplitude-encode the zero vector");
    const double n_c = std::sqrt(norm_sq);

    int qubits = 1;
    while ((1ull << qubits) < values.size()) ++qubits;
    std::vector<sim::Amp> amps(1ull << qubits);
    for (std::size_t i = 0; i < values.size(); ++i) amps[i] = values[i] / n_c;
    return {sim::StateVector::from_amplitudes(qubits, std::move(amps)), n_c};
}

SwapAggregate swap_aggregate(const sim::StateVector& phi_c, double n_c,
                             std::span<const double> weights, std::int64_t shots, Rng& rng) {
    if (shots < 1) throw DomainError("shots must be >= 1");
    std::vector<double> w(weights.begin(), weights.end());
    const AmplitudeEncoding server = amplitude_encode_masked(w);
    const double overlap_sq = sim::swap_test(server.state, phi_c, shots, rng);

    SwapAggregate out;
    double f_hat = overlap_sq;
    if (f_hat < 0.0) {
        f_hat = 0.0;
        out.clamped = true;
    }
    out.estimate = server.normalization * n_c * std::sqrt(f_hat);
    // F-hat = 1 - 2 p-hat from a binomial ancilla; delta method through the
    // square root, with a one-shot variance floor so the error never reads 0.
    const double p_hat = std::clamp((1.0 - overlap_sq) / 2.0, 0.0, 1.0);
    const double var_f = 4.0 * (p_hat * (1.0 - p_hat) + 0.25 / double(shots)) / double(shots);
    const double denom = 2.0 * std::sqrt(std::max(f_hat, 1e-6));
    out.std_error = server.normalization * n_c * std::sqrt(var_f) / denom;
    return out;
}

double classical_round(channel::Ledger& ledger, const CssConfig& cfg,
                       std::span<const double> gradients,
                       std::span<const fl::ClientWeight> weights, std::int64_t round, Rng& rng) {
    cfg.validate();
    const int m = cfg.clients;
    if (gradients.size() != static_cast<std::size_t>(m) || weights.size() != gradients.size()) {
        throw DomainError("need one gradient and one weight per client");
    }
    const auto tag = "css-classical";
    const PadMatrix pads = sample_pads(m, cfg, rng);
    // Pairwise exchange over secure channels: every ordered pair moves one word.
    for (int i = 0; i < m; ++i) {
        for (int k = 0; k < m; ++k) {
            if (i == k) continue;
            channel::send_classical(ledger, channel::PartyId::client(i),
                                    channel::PartyId::client(k), cfg.word_bits, tag, round);
        }
    }
    const PadMatrix p = compute_perturbations(pads, cfg);
    std::vector<std::uint64_t> masked(m);
    for (int i = 0; i < m; ++i) {
        std::span<const std::uint64_t> row{p.s.data() + static_cast<std::size_t>(i) * m,
                                           static_cast<std::size_t>(m)};
        masked[i] = mask_gradient(gradients[i], weights[i], row, cfg);
        channel::send_classical(ledger, channel::PartyId::client(i),
                                channel::PartyId::make_server(), cfg.word_bits, tag, round);
    }
    return server_aggregate_classical(masked, weights, cfg);
}

QuantumRoundResult quantum_round(channel::Ledger& ledger, const CssConfig& cfg,
                                 std::span<const double> gradients,
                                 std::span<const fl::ClientWeight> weights, std::int64_t shots,
                                 std::int64_t round, Rng& rng) {
    cfg.validate();
    const int m = cfg.clients;
    if (gradients.size() != static_cast<std::size_t>(m) || weights.size() != gradients.size()) {
        throw DomainError("need one gradient and one weight per client");
    }
    const auto tag = "css-quantum";
    const SignedPads p = sample_exact_perturbations(m, cfg, rng);
    for (int i = 0; i < m; ++i) {
        for (int k = 0; k < m; ++k) {
            if (i == k) continue;
            channel::send_classical(ledger, channel::PartyId::client(i),
                                    channel::PartyId::client(k), cfg.word_bits, tag, round);
        }
    }

    std::vector<double> shifted(m);
    double weighted_offset = 0.0;
    for (int i = 0; i < m; ++i) {
        std::span<const std::int64_t> row{p.p.data() + static_cast<std::size_t>(i) * m,
                                          static_cast<std::size_t>(m)};
        const std::int64_t y = mask_gradient_exact(gradients[i], weights[i], row, cfg);
        const std::int64_t offset = public_offset(weights[i], cfg);
        shifted[i] = double(y + offset);
        weighted_offset += weights[i].value() * double(offset);
        if (i != 0) {
            // Masked values travel to the designated preparing client.
            channel::send_classical(ledger, channel::PartyId::client(i),
                                    channel::PartyId::client(0), cfg.word_bits, tag, round);
        }
    }

    const AmplitudeEncoding enc = amplitude_encode_masked(shifted);
    // N_c disclosure, then one encoded register per shot.
    channel::send_classical(ledger, channel::PartyId::client(0), channel::PartyId::make_server(),
                            cfg.word_bits, tag, round);
    channel::send_qubits(ledger, channel::PartyId::client(0), channel::PartyId::make_server(),
                         shots * enc.state.num_qubits(), tag, round);

    std::vector<double> w(m);
    for (int i = 0; i < m; ++i) w[i] = weights[i].value();
    const SwapAggregate agg = swap_aggregate(enc.state, enc.normalization, w, shots, rng);

    QuantumRoundResult out;
    out.estimate = std::ldexp(agg.estimate - weighted_offset, -cfg.fraction_bits);
    out.std_error = std::ldexp(agg.std_error, -cfg.fraction_bits);
    return out;
}

}  // namespace qfl::css

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qfl/css_protocol.hpp"

using namespace qfl;
using css::CssConfig;
using fl::ClientWeight;

namespace {

CssConfig base_config(int m) {
    CssConfig cfg;
    cfg.clients = m;
    return cfg;
}

std::vector<ClientWeight> equal_weights(int m) {
    std::vector<ClientWeight> w(m);
    for (int i = 0; i < m; ++i) w[i] = {1, m};
    return w;
}

}  // namespace

TEST_CASE("perturbations are antisymmetric and telescope") {
    const CssConfig cfg = base_config(4);
    Rng rng(3);

    // Symmetric pads cancel entirely.
    css::PadMatrix sym = css::sample_pads(4, cfg, rng);
    for (int i = 0; i < 4; ++i) {
        for (int k = 0; k < i; ++k) sym.at(i, k) = sym.at(k, i);
    }
    const css::PadMatrix p0 = css::compute_perturbations(sym, cfg);
    for (std::uint64_t v : p0.s) CHECK(v == 0);

    // Single client has no peers.
    const css::PadMatrix lone =
        css::compute_perturbations(css::sample_pads(1, cfg, rng), cfg);
    CHECK(lone.s.size() == 1);
    CHECK(lone.s[0] == 0);

    // Random pads: antisymmetry and a zero telescoped sum, mod R.
    for (int log2r : {32, 64}) {
        CssConfig c = cfg;
        c.log2_modulus = log2r;
        const std::uint64_t mask = log2r == 64 ? ~0ull : (1ull << log2r) - 1;
        for (int m : {2, 3, 8, 16}) {
            const css::PadMatrix pads = css::sample_pads(m, c, rng);
            const css::PadMatrix p = css::compute_perturbations(pads, c);
            std::uint64_t total = 0;
            for (int i = 0; i < m; ++i) {
                CHECK(p.at(i, i) == 0);
                for (int k = 0; k < m; ++k) {
                    CHECK(((p.at(i, k) + p.at(k, i)) & mask) == 0);
                    total = (total + p.at(i, k)) & mask;
                }
            }
            CHECK(total == 0);
        }
    }
}

TEST_CASE("masking with zero pads is plain quantization") {
    const CssConfig cfg = base_config(3);
    const std::vector<std::uint64_t> no_pads(3, 0);
    const std::uint64_t y = css::mask_gradient(0.75, {1, 3}, no_pads, cfg);
    CHECK(y == (std::uint64_t(3) << (cfg.fraction_bits - 2)));

    CHECK_THROWS_AS(css::mask_gradient(0.5, {0, 3}, no_pads, cfg), DomainError);
    CHECK_THROWS_AS(css::mask_gradient(100.0, {1, 3}, no_pads, cfg), DomainError);
}

TEST_CASE("classical aggregation unmasks the weighted sum") {
    Rng rng(17);
    std::uniform_real_distribution<double> grad_pick(-1.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        const int m = 2 + trial % 4;
        CssConfig cfg = base_config(m);
        std::vector<ClientWeight> weights(m);
        std::int64_t total = 0;
        std::vector<std::int64_t> counts(m);
        for (int i = 0; i < m; ++i) {
            counts[i] = 1 + (trial + i) % 5;
            total += counts[i];
        }
        for (int i = 0; i < m; ++i) weights[i] = {counts[i], total};

        std::vector<double> grads(m);
        for (double& g : grads) g = grad_pick(rng);

        const css::PadMatrix p = css::compute_perturbations(css::sample_pads(m, cfg, rng), cfg);
        std::vector<std::uint64_t> masked(m);
        for (int i = 0; i < m; ++i) {
            std::span<const std::uint64_t> row{p.s.data() + std::size_t(i) * m, std::size_t(m)};
            masked[i] = css::mask_gradient(grads[i], weights[i], row, cfg);
        }
        const double got = css::server_aggregate_classical(masked, weights, cfg);

        double expect = 0.0;
        for (int i = 0; i < m; ++i) expect += weights[i].value() * grads[i];
        CHECK(std::abs(got - expect) < 1e-9);
    }
}

TEST_CASE("zero gradients aggregate to zero within quantization") {
    const CssConfig cfg = base_config(4);
    Rng rng(23);
    const css::PadMatrix p = css::compute_perturbations(css::sample_pads(4, cfg, rng), cfg);
    std::vector<std::uint64_t> masked(4);
    const auto weights = equal_weights(4);
    for (int i = 0; i < 4; ++i) {
        std::span<const std::uint64_t> row{p.s.data() + std::size_t(i) * 4, std::size_t(4)};
        masked[i] = css::mask_gradient(0.0, weights[i], row, cfg);
    }
    const double got = css::server_aggregate_classical(masked, weights, cfg);
    CHECK(std::abs(got) <= std::ldexp(4.0, -cfg.fraction_bits));
}

TEST_CASE("single masked value is uniform on the modulus (chi-squared)") {
    // Integral weight ratio (equal shards) and a ragged m = 4 mixture; the
    // first is exactly uniform, the second is uniform to far below chi-squared
    // resolution because several independent pads mix across periods.
    const auto chi2_for = [](int m, fl::ClientWeight w, Rng& rng) {
        const CssConfig cfg = CssConfig{.clients = m};
        const int trials = 10000;
        std::vector<std::int64_t> bins(16, 0);
        for (int t = 0; t < trials; ++t) {
            const css::PadMatrix p =
                css::compute_perturbations(css::sample_pads(m, cfg, rng), cfg);
            std::span<const std::uint64_t> row{p.s.data(), std::size_t(m)};
            const std::uint64_t y = css::mask_gradient(0.37, w, row, cfg);
            ++bins[y >> 60];
        }
        const double expected = trials / 16.0;
        double chi2 = 0.0;
        for (std::int64_t b : bins) {
            const double d = double(b) - expected;
            chi2 += d * d / expected;
        }
        return chi2;
    };
    Rng rng(29);
    // chi-squared with 15 dof at p = 0.001 is 37.697.
    CHECK(chi2_for(2, {1, 2}, rng) < 37.697);
    CHECK(chi2_for(4, {25, 100}, rng) < 37.697);
    CHECK(chi2_for(4, {2, 7}, rng) < 37.697);
}

TEST_CASE("exact perturbations cancel in plain integers") {
    CssConfig cfg = base_config(6);
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const css::SignedPads p = css::sample_exact_perturbations(6, cfg, rng);
        std::int64_t total = 0;
        for (int i = 0; i < 6; ++i) {
            for (int k = 0; k < 6; ++k) {
                CHECK(p.at(i, k) + p.at(k, i) == 0);
                total += p.at(i, k);
            }
        }
        CHECK(total == 0);
    }
}

TEST_CASE("public offsets dominate exact-mode masked values") {
    CssConfig cfg = base_config(5);
    Rng rng(37);
    std::uniform_real_distribution<double> grad_pick(-3.9, 3.9);
    for (int trial = 0; trial < 200; ++trial) {
        const css::SignedPads p = css::sample_exact_perturbations(5, cfg, rng);
        for (int i = 0; i < 5; ++i) {
            std::span<const std::int64_t> row{p.p.data() + std::size_t(i) * 5, std::size_t(5)};
            const ClientWeight w{1 + trial % 3, 5 + trial % 7};
            const std::int64_t y = css::mask_gradient_exact(grad_pick(rng), w, row, cfg);
            CHECK(std::abs(y) < css::public_offset(w, cfg));
        }
    }
}

TEST_CASE("amplitude encoding") {
    const css::AmplitudeEncoding basis = css::amplitude_encode_masked(std::vector<double>{1, 0, 0, 0});
    CHECK(basis.normalization == doctest::Approx(1.0));
    CHECK(basis.state.probability(0) == doctest::Approx(1.0));

    const css::AmplitudeEncoding enc = css::amplitude_encode_masked(std::vector<double>{3, 4});
    CHECK(enc.normalization == doctest::Approx(5.0));
    CHECK(enc.state.amplitude(0).real() == doctest::Approx(0.6));
    CHECK(enc.state.amplitude(1).real() == doctest::Approx(0.8));

    const css::AmplitudeEncoding padded =
        css::amplitude_encode_masked(std::vector<double>{1, 1, 1});
    CHECK(padded.state.dim() == 4);
    CHECK(padded.state.amplitude(3) == sim::Amp{});

    CHECK_THROWS_AS(css::amplitude_encode_masked(std::vector<double>{0, 0}), DomainError);
}

TEST_CASE("swap aggregate: parallel, orthogonal, and random instances") {
    Rng rng(41);
    const std::vector<double> w{0.4, 0.3, 0.2, 0.1};

    // y proportional to w: overlap 1, estimate = |w| |y| = sum w y.
    std::vector<double> y(w);
    for (double& v : y) v *= 10.0;
    const css::AmplitudeEncoding enc = css::amplitude_encode_masked(y);
    const css::SwapAggregate parallel =
        css::swap_aggregate(enc.state, enc.normalization, w, 5000, rng);
    double exact = 0.0;
    for (int i = 0; i < 4; ++i) exact += w[i] * y[i];
    CHECK(parallel.estimate == doctest::Approx(exact).epsilon(1e-9));

    // Orthogonal vectors: estimate near zero.
    const css::AmplitudeEncoding ortho = css::amplitude_encode_masked(std::vector<double>{0, 5});
    const css::SwapAggregate zero =
        css::swap_aggregate(ortho.state, ortho.normalization, std::vector<double>{1, 0}, 100000,
                            rng);
    CHECK(zero.estimate < 0.5);

    // Random non-negative instances: within 3 standard errors of the truth.
    std::uniform_real_distribution<double> pick(0.1, 2.0);
    int ok = 0;
    const int runs = 100;
    for (int run = 0; run < runs; ++run) {
        std::vector<double> vals(4);
        for (double& v : vals) v = pick(rng);
        const css::AmplitudeEncoding e = css::amplitude_encode_masked(vals);
        const css::SwapAggregate agg =
            css::swap_aggregate(e.state, e.normalization, w, 100000, rng);
        double truth = 0.0;
        for (int i = 0; i < 4; ++i) truth += w[i] * vals[i];
        if (std::abs(agg.estimate - truth) <= 3.0 * agg.std_error) ++ok;
    }
    CHECK(ok >= 95);
}

TEST_CASE("cost predictions") {
    CssConfig two = base_config(2);
    const css::CostTotals c2 = css::cost_classical(two, 1);
    CHECK(c2.classical_bits == 256);  // pairwise 128 + uploads 128

    CssConfig one = base_config(1);
    CHECK(css::cost_classical(one, 3).classical_bits == 3 * 64);

    // Doubling m takes the pairwise term to ~4x: totals are exactly m^2 d w.
    CssConfig four = base_config(4);
    CssConfig eight = base_config(8);
    CHECK(css::cost_classical(four, 5).classical_bits == 4 * 4 * 5 * 64);
    CHECK(css::cost_classical(eight, 5).classical_bits == 8 * 8 * 5 * 64);

    const css::CostTotals q = css::cost_quantum(four, 1, 100);
    CHECK(q.qubits == 200);  // 100 shots x ceil(log2 4)
    const css::CostTotals q4 = css::cost_quantum(four, 1, 400);
    CHECK(q4.qubits == 800);
    CHECK(q4.classical_bits == q.classical_bits);  // pad term untouched by shots

    CHECK(css::cost_quantum(one, 1, 10).qubits == 10);  // one-qubit floor
}

TEST_CASE("classical round end to end with ledger") {
    Rng rng(47);
    CssConfig cfg = base_config(4);
    channel::Ledger ledger;
    const std::vector<double> grads{0.5, -0.25, 0.125, 0.75};
    const auto weights = equal_weights(4);
    const double got = css::classical_round(ledger, cfg, grads, weights, 0, rng);
    double expect = 0.0;
    for (int i = 0; i < 4; ++i) expect += 0.25 * grads[i];
    CHECK(std::abs(got - expect) < 1e-9);

    // Pairwise words plus uploads, one parameter: m(m-1) w + m w.
    const auto totals = ledger.totals_for("css-classical");
    CHECK(totals.classical_bits == (4 * 3 + 4) * 64);
    CHECK(totals.qubits == 0);
}

TEST_CASE("quantum round estimate is consistent with the plain sum") {
    Rng rng(53);
    CssConfig cfg = base_config(4);
    cfg.fraction_bits = 24;
    cfg.exact_pad_bits = 12;
    channel::Ledger ledger;
    const std::vector<double> grads{0.5, -0.25, 0.125, 0.75};
    const auto weights = equal_weights(4);
    const css::QuantumRoundResult res =
        css::quantum_round(ledger, cfg, grads, weights, 100000, 0, rng);
    double expect = 0.0;
    for (int i = 0; i < 4; ++i) expect += 0.25 * grads[i];
    CHECK(std::abs(res.estimate - expect) <= 3.0 * res.std_error + 1e-6);

    const auto totals = ledger.totals_for("css-quantum");
    CHECK(totals.qubits == 100000 * 2);  // shots x ceil(log2 m)
    // Pads, collection, and the N_c disclosure: m(m-1) + (m-1) + 1 words.
    CHECK(totals.classical_bits == (4 * 3 + 3 + 1) * 64);
}

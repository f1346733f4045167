#include <benchmark/benchmark.h>

#include <vector>

#include "qfl/bqbc_protocol.hpp"
#include "qfl/css_protocol.hpp"
#include "qfl/incremental.hpp"

using namespace qfl;

namespace {

void BM_css_classical_round(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    css::CssConfig cfg;
    cfg.clients = m;
    std::vector<double> grads(m, 0.25);
    std::vector<fl::ClientWeight> weights(m);
    for (int i = 0; i < m; ++i) weights[i] = {1, m};
    Rng rng(3);
    for (auto _ : state) {
        channel::Ledger ledger;
        benchmark::DoNotOptimize(css::classical_round(ledger, cfg, grads, weights, 0, rng));
    }
}
BENCHMARK(BM_css_classical_round)->Arg(4)->Arg(8)->Arg(16);

void BM_swap_aggregate(benchmark::State& state) {
    Rng rng(5);
    const std::vector<double> w{0.4, 0.3, 0.2, 0.1};
    const css::AmplitudeEncoding enc =
        css::amplitude_encode_masked(std::vector<double>{1.0, 0.5, 0.25, 2.0});
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            css::swap_aggregate(enc.state, enc.normalization, w, state.range(0), rng));
    }
}
BENCHMARK(BM_swap_aggregate)->Arg(10000)->Arg(100000);

void BM_bqbc_counting_run(benchmark::State& state) {
    bqbc::BqbcConfig cfg;
    cfg.clients = 2;
    cfg.code_length = 8;
    cfg.counting_qubits = static_cast<int>(state.range(0));
    Rng rng(7);
    bqbc::BitMatrix a = bqbc::BitMatrix::zeros(2, 8);
    bqbc::BitMatrix b = bqbc::BitMatrix::zeros(2, 8);
    std::uniform_int_distribution<int> coin(0, 1);
    for (auto& v : a.bits) v = static_cast<std::uint8_t>(coin(rng));
    for (auto& v : b.bits) v = static_cast<std::uint8_t>(coin(rng));
    for (auto _ : state) {
        channel::Ledger ledger;
        benchmark::DoNotOptimize(bqbc::run_estimate(ledger, cfg, a, b, 0, rng));
    }
}
BENCHMARK(BM_bqbc_counting_run)->Arg(5)->Arg(7)->Arg(9);

void BM_ghz_estimate(benchmark::State& state) {
    incremental::GhzConfig cfg;
    cfg.clients = static_cast<int>(state.range(0));
    cfg.shots_per_quadrature = 10000;
    std::vector<double> grads(cfg.clients, 0.3);
    Rng rng(9);
    for (auto _ : state) {
        channel::Ledger ledger;
        benchmark::DoNotOptimize(incremental::ghz_estimate_sum(ledger, cfg, grads, 0, rng));
    }
}
BENCHMARK(BM_ghz_estimate)->Arg(4)->Arg(8)->Arg(16);

void BM_sms_instance(benchmark::State& state) {
    incremental::SmsConfig cfg;
    cfg.clients = 4;
    cfg.phase_bits = static_cast<int>(state.range(0));
    std::vector<double> grads{0.3, 0.7, 1.1, 1.9};
    Rng rng(11);
    for (auto _ : state) {
        channel::Ledger ledger;
        benchmark::DoNotOptimize(incremental::sms_run(ledger, cfg, grads, 0, rng));
    }
}
BENCHMARK(BM_sms_instance)->Arg(6)->Arg(8)->Arg(10);

}  // namespace

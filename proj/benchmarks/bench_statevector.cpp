#include <benchmark/benchmark.h>

#include "qfl/statevector.hpp"

using namespace qfl;

namespace {

sim::StateVector uniform_state(int qubits) {
    sim::StateVector s = sim::StateVector::basis(qubits, 0);
    for (int q = 0; q < qubits; ++q) s.apply(sim::Gate::h(), q);
    return s;
}

void BM_single_qubit_gate(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    sim::StateVector s = uniform_state(n);
    const sim::Gate h = sim::Gate::h();
    int q = 0;
    for (auto _ : state) {
        s.apply(h, q);
        q = (q + 1) % n;
    }
    state.SetItemsProcessed(state.iterations() * (1ll << n));
}
BENCHMARK(BM_single_qubit_gate)->Arg(10)->Arg(14)->Arg(18)->Arg(20);

void BM_controlled_gate(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    sim::StateVector s = uniform_state(n);
    const sim::Gate x = sim::Gate::x();
    for (auto _ : state) {
        s.apply_controlled(x, {0}, n - 1);
    }
    state.SetItemsProcessed(state.iterations() * (1ll << n));
}
BENCHMARK(BM_controlled_gate)->Arg(10)->Arg(14)->Arg(18);

void BM_qft(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    sim::StateVector s = uniform_state(n);
    for (auto _ : state) {
        s.qft({0, n});
    }
}
BENCHMARK(BM_qft)->Arg(8)->Arg(12)->Arg(16);

void BM_grover_step(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    sim::StateVector s = uniform_state(n);
    const sim::DiagonalOracle oracle = [](std::uint64_t z) {
        return (z % 7 == 0) ? 3.14159265358979 : 0.0;
    };
    for (auto _ : state) {
        s.apply_diagonal(oracle, {0, n});
        s.grover_diffusion({0, n});
    }
}
BENCHMARK(BM_grover_step)->Arg(10)->Arg(14)->Arg(18);

void BM_quantum_count(benchmark::State& state) {
    const int t = static_cast<int>(state.range(0));
    Rng rng(7);
    const sim::DiagonalOracle oracle = [](std::uint64_t z) {
        return (z & 3) == 1 ? 3.14159265358979 : 0.0;
    };
    for (auto _ : state) {
        benchmark::DoNotOptimize(sim::quantum_count(oracle, 5, t, rng));
    }
}
BENCHMARK(BM_quantum_count)->Arg(5)->Arg(7)->Arg(9);

void BM_sample_counts(benchmark::State& state) {
    sim::StateVector s = uniform_state(12);
    Rng rng(11);
    for (auto _ : state) {
        benchmark::DoNotOptimize(s.sample_counts({0, 12}, state.range(0), rng));
    }
}
BENCHMARK(BM_sample_counts)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();

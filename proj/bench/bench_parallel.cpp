// Compares the OpenMP kernels against their sequential reference
// implementations and reports timings plus agreement.

#include "eqstop/dynamics.hpp"
#include "eqstop/equilibrium.hpp"
#include "eqstop/eval.hpp"
#include "eqstop/parallel.hpp"
#include "eqstop/problems.hpp"

#include <chrono>
#include <cstdio>

using namespace eqstop;

namespace {

template <typename F>
double ms(F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void row(const char* name, double serial, double parallel, bool same) {
    std::printf("%-28s %10.1f ms %10.1f ms   x%.2f   %s\n", name, serial, parallel,
                parallel > 0 ? serial / parallel : 0.0, same ? "match" : "MISMATCH");
}

} // namespace

int main() {
    std::printf("workers: %d\n", worker_count());
    std::printf("%-28s %13s %13s %7s\n", "kernel", "serial", "openmp", "speedup");

    {
        VarianceWalkSolution sol = variance_walk(30);
        SimulationResult a, b;
        double ts = ms([&] {
            a = simulate_reference(sol.model, sol.payoff, sol.strategy, 15, 200000, 7);
        });
        double tp = ms([&] { b = simulate(sol.model, sol.payoff, sol.strategy, 15, 200000, 7); });
        row("simulate (2e5 paths)", ts, tp, a.phi_hat == b.phi_hat && a.psi_hat == b.psi_hat);
    }

    {
        WorkedExample ex = worked_example("meanvar18");
        PureEnumeration a, b;
        double ts = ms([&] { a = enumerate_pure_serial(ex.model, ex.payoff); });
        double tp = ms([&] { b = enumerate_pure(ex.model, ex.payoff); });
        bool same = a.equilibria.size() == b.equilibria.size();
        for (size_t i = 0; same && i < a.equilibria.size(); ++i)
            same = a.equilibria[i].p == b.equilibria[i].p;
        row("enumerate_pure (2^16)", ts, tp, same);
    }

    {
        WorkedExample ex = worked_example("meanvar18");
        ResponseGraph a, b;
        double ts = ms([&] { a = response_graph_serial(ex.model, ex.payoff); });
        double tp = ms([&] { b = response_graph(ex.model, ex.payoff); });
        row("response_graph (2^16)", ts, tp, a.image == b.image && a.acyclic == b.acyclic);
    }

    return 0;
}

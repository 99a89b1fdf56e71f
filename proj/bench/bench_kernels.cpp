// Compares the serial reference kernels against the OpenMP ones and a
// whole block solve, and checks that parallel results are bit-identical.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>

#include "binquant/gram.hpp"
#include "binquant/kernels.hpp"
#include "binquant/prng.hpp"
#include "binquant/solver.hpp"
#include "binquant/threading.hpp"

using namespace binquant;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  // One warmup, then best of reps.
  fn();
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main() {
  std::printf("workers: %d\n", worker_count());
  std::printf("%-28s %12s %12s %9s %8s\n", "kernel", "serial(ms)", "parallel(ms)",
              "speedup", "bitwise");

  for (std::size_t n : {128u, 256u, 512u}) {
    const DenseMatrix a = normal_matrix(1, 10, n, n);
    const DenseMatrix b = normal_matrix(2, 11, n, n);
    DenseMatrix out_s, out_p;
    const double ts = time_ms([&] { out_s = serial::matmul(a, b); }, 3);
    const double tp = time_ms([&] { out_p = matmul(a, b); }, 3);
    std::printf("%-20s %zux%-4zu %12.3f %12.3f %8.2fx %8s\n", "matmul", n, n, ts,
                tp, ts / tp, out_s == out_p ? "ok" : "MISMATCH");
  }

  for (std::size_t n : {256u, 1024u}) {
    const DenseMatrix x = normal_matrix(3, 12, n, 256);
    DenseMatrix out_s, out_p;
    const double ts = time_ms([&] { out_s = serial::matmul_at_b(x, x); }, 3);
    const double tp = time_ms([&] { out_p = matmul_at_b(x, x); }, 3);
    std::printf("%-20s %zux%-4u %12.3f %12.3f %8.2fx %8s\n", "gram (xᵀx)", n, 256,
                ts, tp, ts / tp, out_s == out_p ? "ok" : "MISMATCH");
  }

  {
    // Whole solve: blocks run in parallel, kernels inside stay deterministic.
    const SynthInstance inst = synth_instance(7, 128, 512, 256, 0.1);
    const GramBundle grams = grams_from_data(inst.x, inst.x_hat);
    SolverConfig cfg;
    cfg.iters = 5;
    cfg.block_width = 64;
    SolveResult res;
    const double t = time_ms([&] { res = solve(inst.w, grams, cfg); }, 2);
    std::printf("%-28s %12s %12.3f\n", "solve 128x512 (8 blocks)", "-", t);
  }
  return 0;
}

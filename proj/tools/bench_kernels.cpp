#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "trifuse/common.hpp"
#include "trifuse/kernels.hpp"

using Clock = std::chrono::steady_clock;
namespace kern = trifuse::kern;

namespace {

std::vector<double> random_buf(std::size_t n, trifuse::Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

// Median-of-repeats wall time in milliseconds.
template <typename F>
double time_ms(F&& f, int reps) {
    std::vector<double> samples;
    samples.reserve(reps);
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        f();
        const auto t1 = Clock::now();
        samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

void row(const char* name, double serial_ms, double parallel_ms, double diff) {
    std::printf("%-22s %10.3f %10.3f %8.2fx   %s\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, diff == 0.0 ? "bit-exact" : "DIFFERS");
}

}  // namespace

int main() {
    trifuse::Rng rng(42);
    constexpr int kReps = 7;

    std::printf("%-22s %10s %10s %9s   %s\n", "kernel", "serial ms", "parallel", "speedup",
                "serial vs parallel");

    {
        const std::size_t m = 256, k = 256, n = 256;
        const auto a = random_buf(m * k, rng);
        const auto b = random_buf(k * n, rng);
        std::vector<double> cs(m * n), cp(m * n);
        const double ts = time_ms([&] { kern::gemm_nn_serial(a.data(), b.data(), cs.data(), m, k, n, false); }, kReps);
        const double tp = time_ms([&] { kern::gemm_nn_parallel(a.data(), b.data(), cp.data(), m, k, n, false); }, kReps);
        row("gemm_nn 256^3", ts, tp, max_abs_diff(cs, cp));
    }
    {
        const std::size_t m = 256, k = 256, n = 256;
        const auto a = random_buf(m * k, rng);
        const auto b = random_buf(n * k, rng);
        std::vector<double> cs(m * n), cp(m * n);
        const double ts = time_ms([&] { kern::gemm_nt_serial(a.data(), b.data(), cs.data(), m, k, n, false); }, kReps);
        const double tp = time_ms([&] { kern::gemm_nt_parallel(a.data(), b.data(), cp.data(), m, k, n, false); }, kReps);
        row("gemm_nt 256^3", ts, tp, max_abs_diff(cs, cp));
    }
    {
        const std::size_t m = 256, k = 256, n = 256;
        const auto a = random_buf(k * m, rng);
        const auto b = random_buf(k * n, rng);
        std::vector<double> cs(m * n), cp(m * n);
        const double ts = time_ms([&] { kern::gemm_tn_serial(a.data(), b.data(), cs.data(), m, k, n, false); }, kReps);
        const double tp = time_ms([&] { kern::gemm_tn_parallel(a.data(), b.data(), cp.data(), m, k, n, false); }, kReps);
        row("gemm_tn 256^3", ts, tp, max_abs_diff(cs, cp));
    }
    {
        const std::size_t n = 1u << 22;
        const auto x = random_buf(n, rng);
        std::vector<double> ys(n), yp(n);
        const double ts = time_ms([&] { kern::map_unary_serial(kern::Unary::Tanh, x.data(), ys.data(), n); }, kReps);
        const double tp = time_ms([&] { kern::map_unary_parallel(kern::Unary::Tanh, x.data(), yp.data(), n); }, kReps);
        row("tanh 4M", ts, tp, max_abs_diff(ys, yp));
    }
    {
        const std::size_t n = 1u << 22;
        const auto a = random_buf(n, rng);
        const auto b = random_buf(n, rng);
        std::vector<double> ys(n), yp(n);
        const double ts = time_ms([&] { kern::map_binary_serial(kern::Binary::Mul, a.data(), b.data(), ys.data(), n); }, kReps);
        const double tp = time_ms([&] { kern::map_binary_parallel(kern::Binary::Mul, a.data(), b.data(), yp.data(), n); }, kReps);
        row("mul 4M", ts, tp, max_abs_diff(ys, yp));
    }
    {
        const std::size_t m = 4096, n = 512;
        const auto x = random_buf(m * n, rng);
        std::vector<double> ys(m * n), yp(m * n);
        const double ts = time_ms([&] { kern::softmax_rows_serial(x.data(), ys.data(), m, n); }, kReps);
        const double tp = time_ms([&] { kern::softmax_rows_parallel(x.data(), yp.data(), m, n); }, kReps);
        row("softmax 4096x512", ts, tp, max_abs_diff(ys, yp));
    }
    {
        const std::size_t n = 1u << 22;
        const auto x = random_buf(n, rng);
        std::vector<double> ys(n, 0.5), yp(n, 0.5);
        const double ts = time_ms([&] { kern::axpy_serial(0.3, x.data(), ys.data(), n); }, kReps);
        const double tp = time_ms([&] { kern::axpy_parallel(0.3, x.data(), yp.data(), n); }, kReps);
        row("axpy 4M", ts, tp, max_abs_diff(ys, yp));
    }
    return 0;
}

#include "trifuse/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>

namespace trifuse::kern {

namespace {

std::atomic<Mode> g_mode{Mode::Auto};

bool go_parallel(std::size_t work, std::size_t threshold) {
    switch (g_mode.load(std::memory_order_relaxed)) {
        case Mode::ForceSerial: return false;
        case Mode::ForceParallel: return true;
        case Mode::Auto: return work >= threshold;
    }
    return false;
}

inline double unary_apply(Unary op, double x) {
    switch (op) {
        case Unary::Sigmoid: return sigmoid(x);
        case Unary::Tanh: return std::tanh(x);
        case Unary::Relu: return x > 0.0 ? x : 0.0;
        case Unary::LogClamped: return log_clamped(x);
    }
    return 0.0;
}

inline double binary_apply(Binary op, double a, double b) {
    return op == Binary::Add ? a + b : a * b;
}

}  // namespace

void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }
Mode mode() { return g_mode.load(std::memory_order_relaxed); }

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_clamped(double x) {
    return std::log(x > kLogClampFloor ? x : kLogClampFloor);
}

// ---- gemm ----------------------------------------------------------------

void gemm_nn_serial(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc ? c[i * n + j] + s : s;
        }
    }
}

void gemm_nn_parallel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool acc) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc ? c[i * n + j] + s : s;
        }
    }
}

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool acc) {
    if (go_parallel(m * k * n, kGemmParallelMinWork)) {
        gemm_nn_parallel(a, b, c, m, k, n, acc);
    } else {
        gemm_nn_serial(a, b, c, m, k, n, acc);
    }
}

void gemm_nt_serial(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc ? c[i * n + j] + s : s;
        }
    }
}

void gemm_nt_parallel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool acc) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc ? c[i * n + j] + s : s;
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool acc) {
    if (go_parallel(m * k * n, kGemmParallelMinWork)) {
        gemm_nt_parallel(a, b, c, m, k, n, acc);
    } else {
        gemm_nt_serial(a, b, c, m, k, n, acc);
    }
}

void gemm_tn_serial(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
            c[i * n + j] = acc ? c[i * n + j] + s : s;
        }
    }
}

void gemm_tn_parallel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool acc) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
            c[i * n + j] = acc ? c[i * n + j] + s : s;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool acc) {
    if (go_parallel(m * k * n, kGemmParallelMinWork)) {
        gemm_tn_parallel(a, b, c, m, k, n, acc);
    } else {
        gemm_tn_serial(a, b, c, m, k, n, acc);
    }
}

// ---- elementwise maps ------------------------------------------------------

void map_unary_serial(Unary op, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = unary_apply(op, x[i]);
}

void map_unary_parallel(Unary op, const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
        y[i] = unary_apply(op, x[i]);
}

void map_unary(Unary op, const double* x, double* y, std::size_t n) {
    if (go_parallel(n, kMapParallelMinWork)) {
        map_unary_parallel(op, x, y, n);
    } else {
        map_unary_serial(op, x, y, n);
    }
}

void map_binary_serial(Binary op, const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = binary_apply(op, a[i], b[i]);
}

void map_binary_parallel(Binary op, const double* a, const double* b, double* y, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
        y[i] = binary_apply(op, a[i], b[i]);
}

void map_binary(Binary op, const double* a, const double* b, double* y, std::size_t n) {
    if (go_parallel(n, kMapParallelMinWork)) {
        map_binary_parallel(op, a, b, y, n);
    } else {
        map_binary_serial(op, a, b, y, n);
    }
}

void axpy_serial(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_parallel(double alpha, const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) y[i] += alpha * x[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    if (go_parallel(n, kMapParallelMinWork)) {
        axpy_parallel(alpha, x, y, n);
    } else {
        axpy_serial(alpha, x, y, n);
    }
}

void pow_const_serial(const double* x, double p, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::pow(x[i], p);
}

void pow_const_parallel(const double* x, double p, double* y, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) y[i] = std::pow(x[i], p);
}

void pow_const(const double* x, double p, double* y, std::size_t n) {
    if (go_parallel(n, kMapParallelMinWork)) {
        pow_const_parallel(x, p, y, n);
    } else {
        pow_const_serial(x, p, y, n);
    }
}

// ---- softmax ---------------------------------------------------------------

namespace {

inline void softmax_row(const double* x, double* y, std::size_t n) {
    double mx = x[0];
    for (std::size_t j = 1; j < n; ++j) mx = x[j] > mx ? x[j] : mx;
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        y[j] = std::exp(x[j] - mx);
        denom += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= denom;
}

}  // namespace

void softmax_rows_serial(const double* x, double* y, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) softmax_row(x + i * n, y + i * n, n);
}

void softmax_rows_parallel(const double* x, double* y, std::size_t m, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i)
        softmax_row(x + i * n, y + i * n, n);
}

void softmax_rows(const double* x, double* y, std::size_t m, std::size_t n) {
    if (go_parallel(m * n, kMapParallelMinWork)) {
        softmax_rows_parallel(x, y, m, n);
    } else {
        softmax_rows_serial(x, y, m, n);
    }
}

double sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

}  // namespace trifuse::kern

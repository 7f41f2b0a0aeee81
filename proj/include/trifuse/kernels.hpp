#pragma once

#include <cstddef>

namespace trifuse::kern {

// Every kernel exists in two variants: a plain serial reference and an
// OpenMP-parallel version. Parallel loops only ever split work across
// independent output elements (rows of a gemm, entries of a map), so both
// variants produce bit-identical results for any thread count. Reductions to
// a single value stay serial.
//
// The unsuffixed entry points dispatch on problem size: small problems run
// the serial path, large ones the parallel path.

enum class Mode { Auto, ForceSerial, ForceParallel };

void set_mode(Mode m);
Mode mode();

// Work thresholds (multiply counts) below which Auto stays serial.
inline constexpr std::size_t kGemmParallelMinWork = 1u << 18;
inline constexpr std::size_t kMapParallelMinWork = 1u << 16;

// C = A[m x k] * B[k x n], or C += when acc.
void gemm_nn_serial(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);
void gemm_nn_parallel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool acc);
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool acc);

// C = A[m x k] * B[n x k]^T.
void gemm_nt_serial(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);
void gemm_nt_parallel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool acc);
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool acc);

// C = A[k x m]^T * B[k x n].
void gemm_tn_serial(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);
void gemm_tn_parallel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n, bool acc);
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n, bool acc);

enum class Unary { Sigmoid, Tanh, Relu, LogClamped };
enum class Binary { Add, Mul };

void map_unary_serial(Unary op, const double* x, double* y, std::size_t n);
void map_unary_parallel(Unary op, const double* x, double* y, std::size_t n);
void map_unary(Unary op, const double* x, double* y, std::size_t n);

void map_binary_serial(Binary op, const double* a, const double* b, double* y, std::size_t n);
void map_binary_parallel(Binary op, const double* a, const double* b, double* y, std::size_t n);
void map_binary(Binary op, const double* a, const double* b, double* y, std::size_t n);

// y += alpha * x
void axpy_serial(double alpha, const double* x, double* y, std::size_t n);
void axpy_parallel(double alpha, const double* x, double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

// y = x^p, elementwise, constant exponent.
void pow_const_serial(const double* x, double p, double* y, std::size_t n);
void pow_const_parallel(const double* x, double p, double* y, std::size_t n);
void pow_const(const double* x, double p, double* y, std::size_t n);

// Row-wise softmax with per-row max subtraction. Rows are independent.
void softmax_rows_serial(const double* x, double* y, std::size_t m, std::size_t n);
void softmax_rows_parallel(const double* x, double* y, std::size_t m, std::size_t n);
void softmax_rows(const double* x, double* y, std::size_t m, std::size_t n);

// Serial by definition: the accumulation order is part of the contract.
double sum(const double* x, std::size_t n);

// Numerically stable logistic; exact 0/1 in the saturated limits.
double sigmoid(double x);

// ln(max(x, 1e-12)); the clamp floor used by the focal loss.
inline constexpr double kLogClampFloor = 1e-12;
double log_clamped(double x);

}  // namespace trifuse::kern

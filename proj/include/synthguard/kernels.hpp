#ifndef SYNTHGUARD_KERNELS_HPP
#define SYNTHGUARD_KERNELS_HPP

#include <cstddef>

// Numeric inner loops shared by the autodiff graph and the data plumbing.
// The default entry points are OpenMP-parallel; synthguard::kernels::reference
// holds plain serial versions used as oracles in tests and by kernel_bench.
//
// Reductions are blocked with a fixed block size and the per-block partials
// are folded in block order, so results do not depend on the thread count.

namespace synthguard::kernels {

// c = a . b, a is m x k, b is k x n, all row-major.
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);
// c += a . b^T, a is m x n, b is k x n; result m x k (gradient w.r.t. left operand).
void matmul_nt_add(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                   std::size_t k);
// c += a^T . b, a is m x k, b is m x n; result k x n (gradient w.r.t. right operand).
void matmul_tn_add(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n);

void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(const double* a, double alpha, double* out, std::size_t n);

void tanh_v(const double* a, double* out, std::size_t n);
void sigmoid_v(const double* a, double* out, std::size_t n);
void relu_v(const double* a, double* out, std::size_t n);
void softplus_v(const double* a, double* out, std::size_t n);
void sqrt_v(const double* a, double* out, std::size_t n);
void square_v(const double* a, double* out, std::size_t n);

double sum(const double* a, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double sum_squares(const double* a, std::size_t n);

// a is m x n: out[j] = sum_i a[i][j] (out has n entries, overwritten).
void colsum(const double* a, double* out, std::size_t m, std::size_t n);
// a is m x n: out[i] = sum_j a[i][j] (out has m entries, overwritten).
void rowsum(const double* a, double* out, std::size_t m, std::size_t n);

double stable_sigmoid(double x);
double stable_softplus(double x);

namespace reference {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);
void matmul_nt_add(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                   std::size_t k);
void matmul_tn_add(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void tanh_v(const double* a, double* out, std::size_t n);
double sum(const double* a, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void colsum(const double* a, double* out, std::size_t m, std::size_t n);
void rowsum(const double* a, double* out, std::size_t m, std::size_t n);

}  // namespace reference

}  // namespace synthguard::kernels

#endif

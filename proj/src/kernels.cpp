#include "synthguard/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace synthguard::kernels {

namespace {
// Work below these sizes is not worth a parallel region.
constexpr std::size_t kParallelElems = 16384;
constexpr std::size_t kParallelFlops = 65536;
constexpr std::size_t kSumBlock = 1024;
}  // namespace

// A parallel region costs microseconds even when its if-clause is false, so
// small inputs take an explicit serial branch and never reach the pragma.
// Both branches iterate in the same order and give identical results.

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
    std::fill(c, c + m * n, 0.0);
    // ikj order: each output row is produced by exactly one iteration of i,
    // with a fixed inner accumulation order, so results are thread-count
    // independent.
    auto row_of = [&](std::size_t i) {
        for (std::size_t p = 0; p < k; ++p) {
            double aip = a[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = b + p * n;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    };
    if (m * k * n <= kParallelFlops || m == 1) {
        for (std::size_t i = 0; i < m; ++i) row_of(i);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m; ++i) row_of(i);
}

void matmul_nt_add(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                   std::size_t k) {
    auto row_of = [&](std::size_t i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double* arow = a + i * n;
            const double* brow = b + j * n;
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
            c[i * k + j] += acc;
        }
    };
    if (m * n * k <= kParallelFlops || m == 1) {
        for (std::size_t i = 0; i < m; ++i) row_of(i);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m; ++i) row_of(i);
}

void matmul_tn_add(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n) {
    // Parallel over output rows (columns of a); the sum over the m samples
    // stays serial per output element.
    auto col_of = [&](std::size_t j) {
        double* crow = c + j * n;
        for (std::size_t i = 0; i < m; ++i) {
            double aij = a[i * k + j];
            if (aij == 0.0) continue;
            const double* brow = b + i * n;
            for (std::size_t p = 0; p < n; ++p) crow[p] += aij * brow[p];
        }
    };
    if (m * k * n <= kParallelFlops || k == 1) {
        for (std::size_t j = 0; j < k; ++j) col_of(j);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < k; ++j) col_of(j);
}

#define SYNTHGUARD_ELEMENTWISE(body)                    \
    if (n <= kParallelElems) {                          \
        for (std::size_t i = 0; i < n; ++i) {           \
            body;                                       \
        }                                               \
        return;                                         \
    }                                                   \
    _Pragma("omp parallel for schedule(static)")        \
    for (std::size_t i = 0; i < n; ++i) {               \
        body;                                           \
    }

void add(const double* a, const double* b, double* out, std::size_t n) {
    SYNTHGUARD_ELEMENTWISE(out[i] = a[i] + b[i])
}
void sub(const double* a, const double* b, double* out, std::size_t n) {
    SYNTHGUARD_ELEMENTWISE(out[i] = a[i] - b[i])
}
void mul(const double* a, const double* b, double* out, std::size_t n) {
    SYNTHGUARD_ELEMENTWISE(out[i] = a[i] * b[i])
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
    SYNTHGUARD_ELEMENTWISE(y[i] += alpha * x[i])
}
void scale(const double* a, double alpha, double* out, std::size_t n) {
    SYNTHGUARD_ELEMENTWISE(out[i] = alpha * a[i])
}
void tanh_v(const double* a, double* out, std::size_t n) {
    SYNTHGUARD_ELEMENTWISE(out[i] = std::tanh(a[i]))
}
void sigmoid_v(const double* a, double* out, std::size_t n) {
    SYNTHGUARD_ELEMENTWISE(out[i] = stable_sigmoid(a[i]))
}
void relu_v(const double* a, double* out, std::size_t n) {
    SYNTHGUARD_ELEMENTWISE(out[i] = a[i] > 0.0 ? a[i] : 0.0)
}
void softplus_v(const double* a, double* out, std::size_t n) {
    SYNTHGUARD_ELEMENTWISE(out[i] = stable_softplus(a[i]))
}
void sqrt_v(const double* a, double* out, std::size_t n) {
    SYNTHGUARD_ELEMENTWISE(out[i] = std::sqrt(a[i]))
}
void square_v(const double* a, double* out, std::size_t n) {
    SYNTHGUARD_ELEMENTWISE(out[i] = a[i] * a[i])
}

#undef SYNTHGUARD_ELEMENTWISE

namespace {

template <typename Term>
double blocked_reduce(std::size_t n, Term term) {
    if (n == 0) return 0.0;
    std::size_t nblocks = (n + kSumBlock - 1) / kSumBlock;
    if (nblocks == 1) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += term(i);
        return acc;
    }
    std::vector<double> partial(nblocks, 0.0);
    auto block_of = [&](std::size_t b) {
        std::size_t lo = b * kSumBlock;
        std::size_t hi = std::min(lo + kSumBlock, n);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += term(i);
        partial[b] = acc;
    };
    if (n <= kParallelElems) {
        for (std::size_t b = 0; b < nblocks; ++b) block_of(b);
    } else {
#pragma omp parallel for schedule(static)
        for (std::size_t b = 0; b < nblocks; ++b) block_of(b);
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace

double sum(const double* a, std::size_t n) {
    return blocked_reduce(n, [&](std::size_t i) { return a[i]; });
}

double dot(const double* a, const double* b, std::size_t n) {
    return blocked_reduce(n, [&](std::size_t i) { return a[i] * b[i]; });
}

double sum_squares(const double* a, std::size_t n) {
    return blocked_reduce(n, [&](std::size_t i) { return a[i] * a[i]; });
}

void colsum(const double* a, double* out, std::size_t m, std::size_t n) {
    std::fill(out, out + n, 0.0);
    auto col_of = [&](std::size_t j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += a[i * n + j];
        out[j] = acc;
    };
    if (m * n <= kParallelElems || n < 8) {
        for (std::size_t j = 0; j < n; ++j) col_of(j);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < n; ++j) col_of(j);
}

void rowsum(const double* a, double* out, std::size_t m, std::size_t n) {
    auto row_of = [&](std::size_t i) {
        const double* arow = a + i * n;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += arow[j];
        out[i] = acc;
    };
    if (m * n <= kParallelElems) {
        for (std::size_t i = 0; i < m; ++i) row_of(i);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m; ++i) row_of(i);
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

double stable_softplus(double x) {
    // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

namespace reference {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

void matmul_nt_add(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                   std::size_t k) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += a[i * n + p] * b[j * n + p];
            c[i * k + j] += acc;
        }
}

void matmul_tn_add(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n) {
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t p = 0; p < n; ++p) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += a[i * k + j] * b[i * n + p];
            c[j * n + p] += acc;
        }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void sub(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void mul(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void tanh_v(const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(a[i]);
}
double sum(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}
double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}
void colsum(const double* a, double* out, std::size_t m, std::size_t n) {
    std::fill(out, out + n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += a[i * n + j];
}
void rowsum(const double* a, double* out, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += a[i * n + j];
        out[i] = acc;
    }
}

}  // namespace reference

}  // namespace synthguard::kernels

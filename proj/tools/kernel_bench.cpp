// Compares the OpenMP kernels against the serial reference implementations
// and reports wall time plus the largest elementwise deviation.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "synthguard/kernels.hpp"
#include "synthguard/rng.hpp"

namespace ker = synthguard::kernels;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<double> random_vec(std::size_t n, synthguard::Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e100;
    for (int r = 0; r < reps; ++r) {
        auto t0 = Clock::now();
        fn();
        best = std::min(best, ms_since(t0));
    }
    return best;
}

void bench_matmul(std::size_t n, synthguard::Rng& rng) {
    auto a = random_vec(n * n, rng);
    auto b = random_vec(n * n, rng);
    std::vector<double> c_ref(n * n), c_omp(n * n);

    double t_ref = time_best_of(3, [&] { ker::reference::matmul(a.data(), b.data(), c_ref.data(), n, n, n); });
    double t_omp = time_best_of(3, [&] { ker::matmul(a.data(), b.data(), c_omp.data(), n, n, n); });

    double max_err = 0.0;
    for (std::size_t i = 0; i < c_ref.size(); ++i)
        max_err = std::max(max_err, std::abs(c_ref[i] - c_omp[i]));

    double gflops = 2.0 * double(n) * n * n / 1e9;
    std::printf("matmul   %5zu^2  serial %8.2f ms (%5.2f GF/s)  omp %8.2f ms (%5.2f GF/s)  x%.2f  max|d|=%.2e\n",
                n, t_ref, gflops / (t_ref / 1e3), t_omp, gflops / (t_omp / 1e3), t_ref / t_omp,
                max_err);
}

void bench_tanh(std::size_t n, synthguard::Rng& rng) {
    auto a = random_vec(n, rng);
    std::vector<double> o_ref(n), o_omp(n);
    double t_ref = time_best_of(3, [&] { ker::reference::tanh_v(a.data(), o_ref.data(), n); });
    double t_omp = time_best_of(3, [&] { ker::tanh_v(a.data(), o_omp.data(), n); });
    double max_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_err = std::max(max_err, std::abs(o_ref[i] - o_omp[i]));
    std::printf("tanh     %8zu  serial %8.2f ms              omp %8.2f ms              x%.2f  max|d|=%.2e\n",
                n, t_ref, t_omp, t_ref / t_omp, max_err);
}

void bench_sum(std::size_t n, synthguard::Rng& rng) {
    auto a = random_vec(n, rng);
    double s_ref = 0.0, s_omp = 0.0;
    double t_ref = time_best_of(3, [&] { s_ref = ker::reference::sum(a.data(), n); });
    double t_omp = time_best_of(3, [&] { s_omp = ker::sum(a.data(), n); });
    std::printf("sum      %8zu  serial %8.2f ms              omp %8.2f ms              x%.2f  |d|=%.2e\n",
                n, t_ref, t_omp, t_ref / t_omp, std::abs(s_ref - s_omp));
}

}  // namespace

int main() {
    synthguard::Rng rng(12345);
    std::printf("kernel benchmark: OpenMP kernels vs serial reference\n\n");
    for (std::size_t n : {64, 128, 256, 512}) bench_matmul(n, rng);
    std::printf("\n");
    for (std::size_t n : {100000, 1000000, 10000000}) bench_tanh(n, rng);
    std::printf("\n");
    for (std::size_t n : {100000, 1000000, 10000000}) bench_sum(n, rng);
    return 0;
}

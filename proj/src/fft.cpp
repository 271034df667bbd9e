#include "lfp/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace lfp::fft {

namespace {

// rank, n0, n1, howmany, stride, dist, sign
using PlanKey = std::tuple<int, int, int, int, int, int, int>;

std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

std::map<PlanKey, fftw_plan>& plan_cache() {
    static std::map<PlanKey, fftw_plan> cache;
    return cache;
}

fftw_plan get_plan(const PlanKey& key, std::complex<double>* data) {
    std::lock_guard<std::mutex> lock(plan_mutex());
    auto& cache = plan_cache();
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    auto [rank, n0, n1, howmany, stride, dist, sign] = key;
    auto* buf = reinterpret_cast<fftw_complex*>(data);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = nullptr;
    if (rank == 1) {
        int n[1] = {n0};
        plan = fftw_plan_many_dft(1, n, howmany, buf, nullptr, stride, dist,
                                  buf, nullptr, stride, dist, sign, flags);
    } else {
        // Eigen is column-major: an (r x c) matrix is a row-major c x r array.
        plan = fftw_plan_dft_2d(n1, n0, buf, buf, sign, flags);
    }
    if (!plan) throw std::runtime_error("fftw plan creation failed");
    cache.emplace(key, plan);
    return plan;
}

int sign_of(Direction dir) { return dir == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD; }

void execute(fftw_plan plan, std::complex<double>* data) {
    auto* buf = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plan, buf, buf);
}

} // namespace

void columns(Eigen::MatrixXcd& a, Direction dir) {
    const int r = static_cast<int>(a.rows()), c = static_cast<int>(a.cols());
    if (r == 0 || c == 0) return;
    PlanKey key{1, r, 0, c, 1, r, sign_of(dir)};
    execute(get_plan(key, a.data()), a.data());
}

void rows(Eigen::MatrixXcd& a, Direction dir) {
    const int r = static_cast<int>(a.rows()), c = static_cast<int>(a.cols());
    if (r == 0 || c == 0) return;
    PlanKey key{1, c, 0, r, r, 1, sign_of(dir)};
    execute(get_plan(key, a.data()), a.data());
}

void two_d(Eigen::MatrixXcd& a, Direction dir) {
    const int r = static_cast<int>(a.rows()), c = static_cast<int>(a.cols());
    if (r == 0 || c == 0) return;
    PlanKey key{2, r, c, 1, 1, 1, sign_of(dir)};
    execute(get_plan(key, a.data()), a.data());
}

void vector(Eigen::VectorXcd& v, Direction dir) {
    const int n = static_cast<int>(v.size());
    if (n == 0) return;
    PlanKey key{1, n, 0, 1, 1, n, sign_of(dir)};
    execute(get_plan(key, v.data()), v.data());
}

} // namespace lfp::fft

#include "toa/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace toa {
namespace {

struct Plans {
    fftw_plan fwd;
    fftw_plan bwd;
};

std::mutex plan_mutex;

const Plans& plans_for(std::size_t n) {
    static std::map<std::size_t, Plans> cache;
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    // planner scratch; the plans are later executed on caller arrays
    fftw_complex* a = fftw_alloc_complex(n);
    fftw_complex* b = fftw_alloc_complex(n);
    const int ni = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    Plans p{fftw_plan_dft_1d(ni, a, b, FFTW_FORWARD, flags),
            fftw_plan_dft_1d(ni, a, b, FFTW_BACKWARD, flags)};
    fftw_free(a);
    fftw_free(b);
    return cache.emplace(n, p).first->second;
}

void run(fftw_plan plan, const cplx* in, cplx* out, std::size_t n) {
    if (in == out) {
        cvec tmp(in, in + n);
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(tmp.data()),
                         reinterpret_cast<fftw_complex*>(out));
        return;
    }
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

} // namespace

void fft_forward(const cplx* in, cplx* out, std::size_t n) { run(plans_for(n).fwd, in, out, n); }
void fft_backward(const cplx* in, cplx* out, std::size_t n) { run(plans_for(n).bwd, in, out, n); }

cvec fft_forward(const cvec& in) {
    cvec out(in.size());
    fft_forward(in.data(), out.data(), in.size());
    return out;
}

cvec fft_backward(const cvec& in) {
    cvec out(in.size());
    fft_backward(in.data(), out.data(), in.size());
    return out;
}

} // namespace toa

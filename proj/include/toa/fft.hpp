#pragma once

#include "toa/grid.hpp"

namespace toa {

// Unnormalised DFTs: forward uses e^{-2 pi i jk/n}, backward e^{+2 pi i jk/n}.
// Thread safe; plans are cached per length.
void fft_forward(const cplx* in, cplx* out, std::size_t n);
void fft_backward(const cplx* in, cplx* out, std::size_t n);

cvec fft_forward(const cvec& in);
cvec fft_backward(const cvec& in);

} // namespace toa

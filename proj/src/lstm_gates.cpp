#include "lstm_gates.hpp"

#include <cmath>

namespace vpf::nn::detail {

namespace {
// sigmoid(40) rounds to 1 in double precision.
constexpr double kClamp = 40.0;

inline double clampd(double x) { return std::fmin(std::fmax(x, -kClamp), kClamp); }
inline double sig(double x) { return 1.0 / (1.0 + std::exp(-clampd(x))); }
// glibc tanh is several times slower than exp and has no fast vector variant;
// the absolute error of this form stays near one ulp.
inline double tanh_fast(double x) { return 2.0 / (1.0 + std::exp(-2.0 * clampd(x))) - 1.0; }
}  // namespace

void lstm_gates_forward(double* z, const double* c_prev, double* c, double* tanh_c, double* h, std::size_t batch,
                        std::size_t hidden) {
  const std::ptrdiff_t nb = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static) if (batch * hidden > 4096)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    double* __restrict zi = z + b * 4 * hidden;
    double* __restrict zf = zi + hidden;
    double* __restrict zg = zi + 2 * hidden;
    double* __restrict zo = zi + 3 * hidden;
    const double* __restrict cp = c_prev + b * hidden;
    double* __restrict cr = c + b * hidden;
    double* __restrict tr = tanh_c + b * hidden;
    double* __restrict hr = h + b * hidden;
#pragma omp simd
    for (std::size_t j = 0; j < hidden; ++j) {
      const double ig = sig(zi[j]);
      const double fg = sig(zf[j]);
      const double gg = tanh_fast(zg[j]);
      const double og = sig(zo[j]);
      zi[j] = ig;
      zf[j] = fg;
      zg[j] = gg;
      zo[j] = og;
      const double cc = fg * cp[j] + ig * gg;
      const double tc = tanh_fast(cc);
      cr[j] = cc;
      tr[j] = tc;
      hr[j] = og * tc;
    }
  }
}

void lstm_gates_backward(const double* gates, const double* tanh_c, const double* c_prev, const double* dh,
                         const double* dc, double* dz, double* dc_prev, std::size_t batch, std::size_t hidden) {
  const std::ptrdiff_t nb = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static) if (batch * hidden > 4096)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const double* __restrict gi = gates + b * 4 * hidden;
    const double* __restrict gf = gi + hidden;
    const double* __restrict gg_ = gi + 2 * hidden;
    const double* __restrict go = gi + 3 * hidden;
    const double* __restrict tc = tanh_c + b * hidden;
    const double* __restrict cp = c_prev + b * hidden;
    const double* __restrict dhr = dh + b * hidden;
    const double* __restrict dcr = dc + b * hidden;
    double* __restrict dzi = dz + b * 4 * hidden;
    double* __restrict dzf = dzi + hidden;
    double* __restrict dzg = dzi + 2 * hidden;
    double* __restrict dzo = dzi + 3 * hidden;
    double* __restrict dcp = dc_prev + b * hidden;
#pragma omp simd
    for (std::size_t j = 0; j < hidden; ++j) {
      const double ig = gi[j], fg = gf[j], gg = gg_[j], og = go[j];
      const double d_o = dhr[j] * tc[j];
      const double dct = dcr[j] + dhr[j] * og * (1.0 - tc[j] * tc[j]);
      dzi[j] = dct * gg * ig * (1.0 - ig);
      dzf[j] = dct * cp[j] * fg * (1.0 - fg);
      dzg[j] = dct * ig * (1.0 - gg * gg);
      dzo[j] = d_o * og * (1.0 - og);
      dcp[j] = dct * fg;
    }
  }
}

}  // namespace vpf::nn::detail

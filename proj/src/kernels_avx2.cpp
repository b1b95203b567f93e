// Compiled with -mavx2; entry points are only reached when the CPU reports AVX2.
#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gffc/kernels.hpp"

namespace gffc::kernels::avx2 {

bool available() noexcept {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
}

namespace {
inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v), hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}
inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v), hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
}
}  // namespace

void stencil_apply(Grid2 g, const double* x, double* y, double diag, double off) {
  const std::size_t s = g.stride();
  const __m256d vd = _mm256_set1_pd(diag), vo = _mm256_set1_pd(off);
  for (int j = 0; j < g.ny; ++j) {
    const std::size_t row = g.at(0, j);
    int i = 0;
    for (; i + 4 <= g.nx; i += 4) {
      const std::size_t k = row + i;
      __m256d nb = _mm256_add_pd(_mm256_loadu_pd(x + k - 1), _mm256_loadu_pd(x + k + 1));
      nb = _mm256_add_pd(nb, _mm256_loadu_pd(x + k - s));
      nb = _mm256_add_pd(nb, _mm256_loadu_pd(x + k + s));
      const __m256d r = _mm256_sub_pd(_mm256_mul_pd(vd, _mm256_loadu_pd(x + k)), _mm256_mul_pd(vo, nb));
      _mm256_storeu_pd(y + k, r);
    }
    for (; i < g.nx; ++i) {
      const std::size_t k = row + i;
      const double nb = ((x[k - 1] + x[k + 1]) + x[k - s]) + x[k + s];
      y[k] = diag * x[k] - off * nb;
    }
  }
}

double psor_half_sweep(Grid2 g, double* f, const std::uint8_t* obs, int color, double omega,
                       double diag, double off, double lower) {
  const std::size_t s = g.stride();
  const double inv = off / diag;
  const __m256d vinv = _mm256_set1_pd(inv), vom = _mm256_set1_pd(omega), vlow = _mm256_set1_pd(lower);
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d even = _mm256_castsi256_pd(_mm256_setr_epi64x(-1, 0, -1, 0));
  const __m256d odd = _mm256_castsi256_pd(_mm256_setr_epi64x(0, -1, 0, -1));
  __m256d vmax = _mm256_setzero_pd();
  double maxup = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const std::size_t row = g.at(0, j);
    const int p = (color + j) & 1;
    const __m256d pm = p ? odd : even;
    int i = 0;
    for (; i + 4 <= g.nx; i += 4) {
      const std::size_t k = row + i;
      const __m256d old = _mm256_loadu_pd(f + k);
      __m256d nb = _mm256_add_pd(_mm256_loadu_pd(f + k - 1), _mm256_loadu_pd(f + k + 1));
      nb = _mm256_add_pd(nb, _mm256_loadu_pd(f + k - s));
      nb = _mm256_add_pd(nb, _mm256_loadu_pd(f + k + s));
      const __m256d gs = _mm256_mul_pd(vinv, nb);
      __m256d v = _mm256_add_pd(old, _mm256_mul_pd(vom, _mm256_sub_pd(gs, old)));
      std::uint32_t ob4;
      std::memcpy(&ob4, obs + k, 4);
      const __m256i ob = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(int(ob4)));
      const __m256d obm = _mm256_castsi256_pd(_mm256_cmpgt_epi64(ob, _mm256_setzero_si256()));
      const __m256d below = _mm256_and_pd(obm, _mm256_cmp_pd(v, vlow, _CMP_LT_OQ));
      v = _mm256_blendv_pd(v, vlow, below);
      v = _mm256_blendv_pd(old, v, pm);
      vmax = _mm256_max_pd(vmax, _mm256_andnot_pd(sign, _mm256_sub_pd(v, old)));
      _mm256_storeu_pd(f + k, v);
    }
    for (i += ((p - i) & 1); i < g.nx; i += 2) {
      const std::size_t k = row + i;
      const double nb = ((f[k - 1] + f[k + 1]) + f[k - s]) + f[k + s];
      double v = f[k] + omega * (inv * nb - f[k]);
      if (obs[k] && v < lower) v = lower;
      maxup = std::max(maxup, std::abs(v - f[k]));
      f[k] = v;
    }
  }
  return std::max(maxup, hmax(vmax));
}

double edge_energy(Grid2 g, const double* f) {
  const std::size_t s = g.stride();
  __m256d acc = _mm256_setzero_pd();
  double tail = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const std::size_t row = g.at(0, j);
    int i = 0;
    for (; i + 4 <= g.nx + 1; i += 4) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(f + row + i), _mm256_loadu_pd(f + row + i - 1));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    for (; i <= g.nx; ++i) {
      const double d = f[row + i] - f[row + i - 1];
      tail += d * d;
    }
  }
  for (int j = 0; j <= g.ny; ++j) {
    const std::size_t row = (std::size_t(j) + 1) * s + 1;
    int i = 0;
    for (; i + 4 <= g.nx; i += 4) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(f + row + i), _mm256_loadu_pd(f + row + i - s));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    for (; i < g.nx; ++i) {
      const double d = f[row + i] - f[row + i - s];
      tail += d * d;
    }
  }
  return hsum(acc) + tail;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
  }
  double r = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
  for (; i < n; ++i) y[i] += a * x[i];
}

}  // namespace gffc::kernels::avx2

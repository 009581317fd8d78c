#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "oodbench/evaluation.hpp"
#include "oodbench/fourier.hpp"
#include "oodbench/imgops.hpp"
#include "oodbench/metrics.hpp"
#include "oodbench/ref/reference.hpp"
#include "oodbench/rng.hpp"

using namespace oodbench;

namespace {

Image2D random_image(int w, int h, rng::SplitMix64& g) {
  Image2D im(w, h);
  for (double& v : im.data) v = g.next_double();
  return im;
}

double max_abs_diff(const Image2D& a, const Image2D& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

/// Wall time per call in milliseconds, best of the given repetitions so
/// one-off scheduler noise does not inflate the figure.
double time_ms(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void print_row(const char* name, const char* size, double opt_ms, double ref_ms,
               double diff) {
  std::printf("%-22s %-10s %10.3f %12.3f %9.2fx   %.3e\n", name, size, opt_ms, ref_ms,
              ref_ms / opt_ms, diff);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel timings: optimized implementations vs serial references"};
  int threads = 0;
  app.add_option("--threads", threads, "Worker thread cap, 0 keeps the OpenMP default");
  CLI11_PARSE(app, argc, argv);
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  (void)threads;
  std::printf("openmp: disabled at build time\n");
#endif
  std::printf("%-22s %-10s %10s %12s %10s   %s\n", "kernel", "size", "opt ms", "ref ms",
              "speedup", "max |diff|");

  rng::SplitMix64 g = rng::stream(42, "bench");

  {
    const Image2D im = random_image(256, 256, g);
    const std::vector<double> k = img::gaussian_kernel(2.0);
    Image2D fast, slow;
    const double t_opt = time_ms(10, [&] { fast = img::convolve2d_separable(im, k); });
    const double t_ref = time_ms(3, [&] { slow = ref::convolve2d_naive(im, k); });
    print_row("convolve2d", "256x256", t_opt, t_ref, max_abs_diff(fast, slow));
  }

  {
    const Image2D im = random_image(64, 64, g);
    fft::ComplexImage2D fast;
    Image2D ref_re(64, 64), ref_im(64, 64);
    const double t_opt = time_ms(20, [&] { fast = fft::fft2(im); });
    const double t_ref = time_ms(3, [&] { ref::dft2_naive(im, &ref_re, &ref_im); });
    double diff = 0.0;
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        diff = std::max(diff, std::abs(fast.at(x, y).real() - ref_re.at(x, y)));
        diff = std::max(diff, std::abs(fast.at(x, y).imag() - ref_im.at(x, y)));
      }
    }
    print_row("fft2", "64x64", t_opt, t_ref, diff);
  }

  {
    rng::SplitMix64 g2 = rng::stream(42, "bench-ssim");
    const Image2D x = random_image(128, 128, g);
    Image2D y = x;
    for (double& v : y.data) v = std::clamp(v + 0.05 * g2.gauss(), 0.0, 1.0);
    metrics::SsimMaps fast;
    ref::SsimRefMaps slow;
    const metrics::SsimConfig c;
    const double t_opt = time_ms(10, [&] { fast = metrics::ssim_maps(x, y, c); });
    const double t_ref =
        time_ms(3, [&] { slow = ref::ssim_direct(x, y, c.window, c.c1, c.c2, c.c3); });
    const double diff = std::max(
        std::max(max_abs_diff(fast.contrast.values, slow.contrast),
                 max_abs_diff(fast.luminance.values, slow.luminance)),
        std::max(max_abs_diff(fast.structure.values, slow.structure),
                 max_abs_diff(fast.ssim.values, slow.ssim)));
    print_row("ssim_maps", "128x128", t_opt, t_ref, diff);
  }

  {
    std::vector<Image2D> maps;
    std::vector<Mask2D> masks;
    for (int i = 0; i < 20; ++i) {
      maps.push_back(random_image(64, 64, g));
      Mask2D mk(64, 64);
      for (auto& b : mk.bits) b = g.next_double() < 0.1 ? 1 : 0;
      masks.push_back(std::move(mk));
    }
    std::vector<const Image2D*> mp;
    std::vector<const Mask2D*> kp;
    for (const Image2D& m : maps) mp.push_back(&m);
    for (const Mask2D& m : masks) kp.push_back(&m);
    eval::PRCurve fast;
    ref::RefPRCurve slow;
    const double t_opt = time_ms(10, [&] { fast = eval::pr_curve(mp, kp); });
    const double t_ref =
        time_ms(3, [&] { slow = ref::pr_rescan(mp, kp, eval::threshold_grid()); });
    double diff = std::fabs(fast.auprc - slow.auprc);
    for (std::size_t i = 0; i < fast.precision.size(); ++i) {
      diff = std::max(diff, std::fabs(fast.precision[i] - slow.precision[i]));
      diff = std::max(diff, std::fabs(fast.recall[i] - slow.recall[i]));
    }
    print_row("pr_curve", "20x64x64", t_opt, t_ref, diff);
  }

  return 0;
}

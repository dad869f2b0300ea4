#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ellipsedet/encoding.hpp"
#include "ellipsedet/geometry.hpp"
#include "ellipsedet/losses.hpp"

using namespace ellipsedet;

namespace {

std::vector<Ellipse> random_ellipses(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Ellipse> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 5.0 + 60.0 * u(rng);
    out.push_back(Ellipse::make(256 * u(rng), 192 * u(rng), a, a * (0.3 + 0.7 * u(rng)),
                                kPi * (u(rng) - 0.5)));
  }
  return out;
}

void BM_RotatedRectIou(benchmark::State& state) {
  const auto es = random_ellipses(1024);
  std::size_t i = 0;
  for (auto _ : state) {
    const RotatedRect a = ellipse_to_tight_rect(es[i % es.size()]);
    const RotatedRect b = ellipse_to_tight_rect(es[(i + 1) % es.size()]);
    benchmark::DoNotOptimize(rotated_rect_iou(a, b));
    ++i;
  }
}
BENCHMARK(BM_RotatedRectIou);

void BM_DiouGradient(benchmark::State& state) {
  const auto es = random_ellipses(1024);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(diou_gradient(es[i % es.size()], es[(i + 7) % es.size()]));
    ++i;
  }
}
BENCHMARK(BM_DiouGradient);

void BM_RasterizeEllipse(benchmark::State& state) {
  const Ellipse e = Ellipse::make(128, 96, 70, 55, 0.3);
  const auto supersample = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(rasterize_ellipse(e, 256, 192, supersample));
}
BENCHMARK(BM_RasterizeEllipse)->Arg(1)->Arg(4);

void BM_EncodeDecode(benchmark::State& state) {
  const std::vector<Annotation> scene{{kThorax, Ellipse::make(128, 96, 70, 55, 0.3)},
                                      {kHeart, Ellipse::make(140, 100, 30, 22, -0.6)}};
  for (auto _ : state) {
    const EncodedTargets t = encode(scene, 256, 192);
    benchmark::DoNotOptimize(decode(t, 1, 0.3));
  }
}
BENCHMARK(BM_EncodeDecode);

}  // namespace

#include <benchmark/benchmark.h>

#include <random>

#include "ellipsedet/detector/net.hpp"
#include "ellipsedet/synth.hpp"

using namespace ellipsedet;

namespace {

Image noise_image(int w, int h) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0F, 1.0F);
  Image img(w, h);
  for (float& v : img.pixels) v = u(rng);
  return img;
}

void BM_Forward(benchmark::State& state) {
  const ToyNet<float> net(NetConfig{}, 1);
  const Image img = noise_image(256, 192);
  for (auto _ : state) benchmark::DoNotOptimize(net.predict(img));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  ToyNet<float> net(NetConfig{}, 1);
  const Image img = noise_image(256, 192);
  const EncodedTargets shape = net.predict(img);
  const int w = shape.grid_w();
  const int h = shape.grid_h();
  const HeadGradients g{GridMap(shape.heatmap.channels(), w, h, 1e-3), GridMap(2, w, h, 1e-3),
                        GridMap(1, w, h, 1e-3), GridMap(1, w, h, 1e-3), GridMap(1, w, h, 1e-3),
                        GridMap(1, w, h, 1e-3)};
  for (auto _ : state) {
    net.params().zero_grad();
    nn::Tape<float> tape(net.params());
    const auto heads = net.forward(tape, img);
    net.backward(tape, heads, g);
  }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

void BM_RenderScene(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(render(sample_spec(seed++, SynthRanges{})));
}
BENCHMARK(BM_RenderScene)->Unit(benchmark::kMillisecond);

}  // namespace

#include "ellipsedet/detector/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ellipsedet/errors.hpp"

namespace ellipsedet {

namespace {

constexpr char kMagic[8] = {'E', 'L', 'D', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kInputMean = 0.25;
constexpr double kInputScale = 4.0;
constexpr double kHeatmapPrior = 0.1;
constexpr double kDeltaAPrior = 0.39;
constexpr double kDeltaBPrior = 0.31;

double logit(double p) { return std::log(p / (1.0 - p)); }

nlohmann::json config_to_json(const NetConfig& c) {
  return {{"encoder", c.encoder},           {"neck", c.neck},
          {"head", c.head},                 {"num_classes", c.num_classes},
          {"length_scale", c.length_scale}, {"length_prior", c.length_prior}};
}

NetConfig config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.encoder = j.at("encoder").get<std::array<int, 5>>();
  c.neck = j.at("neck").get<int>();
  c.head = j.at("head").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.length_scale = j.at("length_scale").get<double>();
  c.length_prior = j.at("length_prior").get<double>();
  return c;
}

template <typename T>
GridMap to_grid(const nn::Tensor<T>& t) {
  GridMap g(t.c, t.w, t.h);
  auto out = g.values();
  for (std::size_t i = 0; i < t.data.size(); ++i) out[i] = static_cast<double>(t.data[i]);
  return g;
}

template <typename T>
void seed_grad(nn::Tape<T>& tape, typename nn::Tape<T>::Node node, const GridMap& g) {
  nn::Tensor<T>& dst = tape.grad(node);
  const auto src = g.values();
  if (src.size() != dst.data.size()) throw InvalidArgument("head gradient shape mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) dst.data[i] += static_cast<T>(src[i]);
}

}  // namespace

template <typename T>
typename ToyNet<T>::ConvIds ToyNet<T>::add_conv(const std::string& name, int in_c, int out_c,
                                                int kernel, int stride) {
  ConvIds ids;
  ids.weight = params_.add(name + ".weight", {out_c, in_c, kernel, kernel});
  ids.bias = params_.add(name + ".bias", {out_c});
  ids.kernel = kernel;
  ids.stride = stride;
  return ids;
}

template <typename T>
ToyNet<T>::ToyNet(const NetConfig& config, std::uint64_t seed) : config_(config) {
  const auto& e = config_.encoder;
  const int n = config_.neck;
  const int h = config_.head;
  int in_c = 1;
  for (int i = 0; i < 5; ++i) {
    enc_[i] = add_conv("enc" + std::to_string(i + 1), in_c, e[i], 3, 2);
    in_c = e[i];
  }
  for (int i = 0; i < 4; ++i) {
    lateral_[i] = add_conv("lat" + std::to_string(i + 2), e[i + 1], n, 1, 1);
  }
  for (int i = 0; i < 3; ++i) dec_[i] = add_conv("dec" + std::to_string(4 - i), n, n, 3, 1);
  const char* groups[5] = {"heatmap", "offset", "length", "delta_ab", "delta_theta"};
  for (int i = 0; i < 5; ++i) {
    head_hidden_[i] = add_conv(std::string("head.") + groups[i] + ".hidden", n, h, 3, 1);
  }
  out_heatmap_ = add_conv("head.heatmap.out", h, config_.num_classes, 1, 1);
  out_offset_ = add_conv("head.offset.out", h, 2, 1, 1);
  out_length_ = add_conv("head.length.out", h, 1, 1, 1);
  out_delta_a_ = add_conv("head.delta_a.out", h, 1, 1, 1);
  out_delta_b_ = add_conv("head.delta_b.out", h, 1, 1, 1);
  out_delta_theta_ = add_conv("head.delta_theta.out", h, 1, 1, 1);

  // He-normal weights for hidden layers, small output projections, and
  // output biases set to the prior of each quantity.
  std::mt19937_64 rng(seed);
  for (auto& p : params_.all()) {
    if (p.shape.size() != 4) continue;
    const double fan_in = static_cast<double>(p.shape[1] * p.shape[2] * p.shape[3]);
    const bool output = p.name.rfind(".out.weight") != std::string::npos;
    std::normal_distribution<double> dist(0.0, output ? 0.01 : std::sqrt(2.0 / fan_in));
    for (T& v : p.value) v = static_cast<T>(dist(rng));
  }
  auto fill_bias = [&](const ConvIds& ids, double v) {
    for (T& b : params_[ids.bias].value) b = static_cast<T>(v);
  };
  fill_bias(out_heatmap_, logit(kHeatmapPrior));
  fill_bias(out_length_, config_.length_prior / config_.length_scale);
  fill_bias(out_delta_a_, logit(kDeltaAPrior));
  fill_bias(out_delta_b_, logit(kDeltaBPrior));
}

template <typename T>
typename ToyNet<T>::Heads ToyNet<T>::forward(nn::Tape<T>& tape, const Image& image) const {
  if (image.width % kNetStride != 0 || image.height % kNetStride != 0) {
    throw InvalidArgument("forward: image dimensions must be multiples of 4");
  }
  nn::Tensor<T> x(1, image.height, image.width);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    x.data[i] = static_cast<T>((image.pixels[i] - kInputMean) * kInputScale);
  }
  auto conv = [&](Node in, const ConvIds& ids) {
    return tape.conv2d(in, ids.weight, ids.bias, nn::ConvSpec{ids.kernel, ids.stride});
  };

  std::array<Node, 5> stage{};
  Node cur = tape.input(std::move(x));
  for (int i = 0; i < 5; ++i) {
    cur = tape.relu(conv(cur, enc_[i]));
    stage[i] = cur;
  }
  // Top-down path: stride 32 -> 16 -> 8 -> 4.
  Node top = conv(stage[4], lateral_[3]);
  for (int i = 0; i < 3; ++i) {
    const Node skip = conv(stage[3 - i], lateral_[2 - i]);
    const auto& target = tape.value(skip);
    const Node up = tape.upsample2x(top, target.h, target.w);
    top = tape.relu(conv(tape.add(up, skip), dec_[i]));
  }
  const Node features = top;

  Heads heads{};
  std::array<Node, 5> hidden{};
  for (int i = 0; i < 5; ++i) hidden[i] = tape.relu(conv(features, head_hidden_[i]));
  heads.heatmap = tape.sigmoid(conv(hidden[0], out_heatmap_));
  heads.offset = conv(hidden[1], out_offset_);
  heads.length = tape.scale(conv(hidden[2], out_length_), static_cast<T>(config_.length_scale));
  heads.delta_a = tape.sigmoid(conv(hidden[3], out_delta_a_));
  heads.delta_b = tape.sigmoid(conv(hidden[3], out_delta_b_));
  heads.delta_theta = conv(hidden[4], out_delta_theta_);
  return heads;
}

template <typename T>
EncodedTargets ToyNet<T>::read_heads(const nn::Tape<T>& tape, const Heads& heads) const {
  EncodedTargets out;
  out.stride = kNetStride;
  out.heatmap = to_grid(tape.value(heads.heatmap));
  out.offset = to_grid(tape.value(heads.offset));
  out.square_length = to_grid(tape.value(heads.length));
  out.delta_a = to_grid(tape.value(heads.delta_a));
  out.delta_b = to_grid(tape.value(heads.delta_b));
  out.delta_theta = to_grid(tape.value(heads.delta_theta));
  out.center_mask = GridMap(1, out.heatmap.width(), out.heatmap.height());
  out.input_w = out.heatmap.width() * kNetStride;
  out.input_h = out.heatmap.height() * kNetStride;
  return out;
}

template <typename T>
void ToyNet<T>::backward(nn::Tape<T>& tape, const Heads& heads, const HeadGradients& g) const {
  if (tape.empty()) throw std::logic_error("backward called before any forward pass");
  seed_grad(tape, heads.heatmap, g.heatmap);
  seed_grad(tape, heads.offset, g.offset);
  seed_grad(tape, heads.length, g.square_length);
  seed_grad(tape, heads.delta_a, g.delta_a);
  seed_grad(tape, heads.delta_b, g.delta_b);
  seed_grad(tape, heads.delta_theta, g.delta_theta);
  tape.backward();
}

template <typename T>
EncodedTargets ToyNet<T>::predict(const Image& image) const {
  // The tape wants a mutable store for backward; forward alone never writes to it.
  nn::ParameterStore<T> scratch_grads = params_;
  nn::Tape<T> tape(scratch_grads);
  const Heads heads = forward(tape, image);
  return read_heads(tape, heads);
}

template class ToyNet<float>;
template class ToyNet<double>;

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

template <typename V>
void write_pod(std::ofstream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::ifstream& in, const std::filesystem::path& path) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw DataError(path.string() + ": truncated checkpoint");
  return v;
}

}  // namespace

template <typename T>
void save_checkpoint(const ToyNet<T>& net, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kCheckpointVersion);
    const std::string cfg = config_to_json(net.config()).dump();
    write_pod(out, static_cast<std::uint32_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    const auto& params = net.params().all();
    write_pod(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
      write_pod(out, static_cast<std::uint32_t>(p.name.size()));
      out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      write_pod(out, static_cast<std::uint32_t>(p.shape.size()));
      for (int d : p.shape) write_pod(out, static_cast<std::int32_t>(d));
      for (T v : p.value) write_pod(out, static_cast<float>(v));
    }
    if (!out) throw DataError("short write to checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
ToyNet<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + ": not a checkpoint file");
  }
  if (read_pod<std::uint32_t>(in, path) != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version");
  }
  const auto cfg_len = read_pod<std::uint32_t>(in, path);
  std::string cfg(cfg_len, '\0');
  in.read(cfg.data(), cfg_len);
  NetConfig config;
  try {
    config = config_from_json(nlohmann::json::parse(cfg));
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(path.string() + ": bad network config: " + ex.what());
  }
  ToyNet<T> net(config, 0);
  const auto count = read_pod<std::uint32_t>(in, path);
  if (static_cast<int>(count) != net.params().size()) {
    throw DataError(path.string() + ": parameter count does not match the network");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const int id = net.params().find(name);
    if (id < 0) throw DataError(path.string() + ": unknown parameter " + name);
    auto& p = net.params()[id];
    const auto ndim = read_pod<std::uint32_t>(in, path);
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(read_pod<std::int32_t>(in, path));
    if (shape != p.shape) throw DataError(path.string() + ": shape mismatch for " + name);
    for (T& v : p.value) v = static_cast<T>(read_pod<float>(in, path));
  }
  return net;
}

template void save_checkpoint(const ToyNet<float>&, const std::filesystem::path&);
template void save_checkpoint(const ToyNet<double>&, const std::filesystem::path&);
template ToyNet<float> load_checkpoint(const std::filesystem::path&);
template ToyNet<double> load_checkpoint(const std::filesystem::path&);

template <typename T>
std::vector<Detection> infer(const ToyNet<T>& net, const Image& image, double score_threshold,
                             int max_per_class) {
  return decode(net.predict(image), max_per_class, score_threshold);
}

template std::vector<Detection> infer(const ToyNet<float>&, const Image&, double, int);
template std::vector<Detection> infer(const ToyNet<double>&, const Image&, double, int);

}  // namespace ellipsedet

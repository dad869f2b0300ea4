#include "ellipsedet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ellipsedet/errors.hpp"

namespace ellipsedet {

namespace fs = std::filesystem;
using nlohmann::json;

RgbImage::RgbImage(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw InvalidArgument("RgbImage: dimensions must be positive");
  pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), {0, 0, 0});
}

void write_pgm(const fs::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<char> bytes(image.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(static_cast<double>(image.pixels[i]), 0.0, 1.0);
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

Image read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  if (next_token(in) != "P5") throw DataError(path.string() + ": not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(in));
    h = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw DataError(path.string() + ": unsupported PGM dimensions or depth");
  }
  Image image(w, h);
  std::vector<char> bytes(image.pixels.size());
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw DataError(path.string() + ": truncated pixel data");
  }
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    image.pixels[i] = static_cast<float>(static_cast<unsigned char>(bytes[i])) /
                      static_cast<float>(maxval);
  }
  return image;
}

void write_ppm(const fs::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  for (const auto& px : image.pixels) {
    out.write(reinterpret_cast<const char*>(px.data()), 3);
  }
  if (!out) throw DataError("short write to " + path.string());
}

void write_annotations(const fs::path& path, const std::vector<DatasetEntry>& entries) {
  json arr = json::array();
  for (const DatasetEntry& e : entries) {
    json objects = json::array();
    for (const LabeledObject& o : e.objects) {
      json j = {{"class", o.class_id},  {"cx", o.ellipse.cx}, {"cy", o.ellipse.cy},
                {"a", o.ellipse.a},     {"b", o.ellipse.b},   {"theta", o.ellipse.theta}};
      if (o.score) j["score"] = *o.score;
      objects.push_back(std::move(j));
    }
    arr.push_back({{"image", e.image}, {"objects", std::move(objects)}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << arr.dump(1) << '\n';
}

std::vector<DatasetEntry> read_annotations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<DatasetEntry> entries;
  try {
    const json arr = json::parse(in);
    for (const json& item : arr) {
      DatasetEntry e;
      e.image = item.at("image").get<std::string>();
      for (const json& o : item.at("objects")) {
        LabeledObject obj;
        obj.class_id = o.at("class").get<int>();
        obj.ellipse = Ellipse::make(o.at("cx").get<double>(), o.at("cy").get<double>(),
                                    o.at("a").get<double>(), o.at("b").get<double>(),
                                    o.at("theta").get<double>());
        if (o.contains("score")) obj.score = o.at("score").get<double>();
        e.objects.push_back(obj);
      }
      entries.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    throw DataError(path.string() + ": " + ex.what());
  } catch (const InvalidArgument& ex) {
    throw DataError(path.string() + ": " + ex.what());
  }
  return entries;
}

std::vector<Annotation> to_annotations(const DatasetEntry& entry) {
  std::vector<Annotation> out;
  out.reserve(entry.objects.size());
  for (const LabeledObject& o : entry.objects) out.push_back({o.class_id, o.ellipse});
  return out;
}

std::string GenConfig::canonical_string() const {
  std::ostringstream os;
  os << std::setprecision(17) << "count=" << count << ";train_fraction=" << train_fraction
     << ";master_seed=" << master_seed << ";image=" << ranges.image_w << "x" << ranges.image_h
     << ";thorax_a=" << ranges.thorax_a_min << ".." << ranges.thorax_a_max
     << ";thorax_aspect=" << ranges.thorax_aspect_min << ".." << ranges.thorax_aspect_max
     << ";thorax_theta_max=" << ranges.thorax_theta_max << ";ctr=" << ranges.ctr_min << ".."
     << ranges.ctr_max << ";heart_aspect=" << ranges.heart_aspect_min << ".."
     << ranges.heart_aspect_max << ";axis_deg=" << ranges.axis_deg_min << ".."
     << ranges.axis_deg_max << ";heart_offset_max=" << ranges.heart_offset_max
     << ";noise=" << ranges.noise_min << ".." << ranges.noise_max
     << ";shadows=" << ranges.shadow_min << ".." << ranges.shadow_max;
  return os.str();
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

GeneratedCounts generate_dataset(const fs::path& root, const GenConfig& config) {
  if (config.count < 2) throw InvalidArgument("gen: count must be at least 2");
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    throw InvalidArgument("gen: train fraction must lie in (0, 1)");
  }
  config.ranges.validate();

  std::error_code ec;
  fs::create_directories(root / "train", ec);
  fs::create_directories(root / "test", ec);
  if (ec || !fs::is_directory(root / "train") || !fs::is_directory(root / "test")) {
    throw DataError("gen: cannot create output directories under " + root.string());
  }

  const int n = config.count;
  const int n_train = static_cast<int>(std::lround(n * config.train_fraction));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(derive_seed(config.master_seed, 0x5317));
  std::shuffle(order.begin(), order.end(), split_rng);

  std::vector<DatasetEntry> train;
  std::vector<DatasetEntry> test;
  std::vector<DatasetEntry> entries(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));

  auto make_one = [&](int slot) {
    const int scene_index = order[static_cast<std::size_t>(slot)];
    const bool is_train = slot < n_train;
    const int local = is_train ? slot : slot - n_train;
    std::ostringstream name;
    name << (is_train ? "train/" : "test/") << std::setw(6) << std::setfill('0') << local
         << ".pgm";
    try {
      const SceneSpec spec =
          sample_spec(derive_seed(config.master_seed, static_cast<std::uint64_t>(scene_index)),
                      config.ranges);
      const Scene scene = render(spec);
      write_pgm(root / name.str(), scene.image);
      DatasetEntry entry{name.str(), {}};
      for (const Annotation& a : scene.annotations) {
        entry.objects.push_back({a.class_id, a.ellipse, std::nullopt});
      }
      entries[static_cast<std::size_t>(slot)] = std::move(entry);
    } catch (const std::exception& ex) {
      errors[static_cast<std::size_t>(slot)] = ex.what();
    }
  };

  const int threads = std::max(1, config.threads);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) make_one(i);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (int i = t; i < n; i += threads) make_one(i);
      });
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw DataError("gen: " + e);
  }

  for (int slot = 0; slot < n; ++slot) {
    (slot < n_train ? train : test).push_back(entries[static_cast<std::size_t>(slot)]);
  }
  write_annotations(root / "train.json", train);
  write_annotations(root / "test.json", test);

  const json manifest = {{"format", "ellipsedet-dataset"},
                         {"version", 1},
                         {"master_seed", config.master_seed},
                         {"count", n},
                         {"train", n_train},
                         {"test", n - n_train},
                         {"image_w", config.ranges.image_w},
                         {"image_h", config.ranges.image_h},
                         {"config", config.canonical_string()},
                         {"config_hash", fnv1a_hex(config.canonical_string())}};
  std::ofstream out(root / "manifest.json");
  if (!out) throw DataError("cannot write manifest under " + root.string());
  out << manifest.dump(1) << '\n';
  return {n_train, n - n_train};
}

Split load_split(const fs::path& root, const std::string& name) {
  Split split;
  split.entries = read_annotations(root / (name + ".json"));
  split.images.reserve(split.entries.size());
  for (const DatasetEntry& e : split.entries) split.images.push_back(read_pgm(root / e.image));
  return split;
}

}  // namespace ellipsedet

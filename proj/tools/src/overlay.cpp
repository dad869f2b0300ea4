#include "ellipsedet_cli/overlay.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "ellipsedet/angles.hpp"
#include "ellipsedet/encoding.hpp"

namespace ellipsedet::cli {

namespace {

using Rgb = std::array<std::uint8_t, 3>;

constexpr Rgb kRed{255, 0, 0};
constexpr Rgb kCyan{0, 255, 255};
constexpr Rgb kGreen{0, 255, 0};

Rgb pred_color(int class_id) { return class_id == kHeart ? kGreen : kCyan; }

const char* hex(const Rgb& c) {
  if (c == kRed) return "#ff0000";
  if (c == kGreen) return "#00ff00";
  return "#00ffff";
}

void draw(RgbImage& out, const Ellipse& e, const Rgb& color) {
  const BinaryMask outline = ellipse_outline(e, out.width, out.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      if (outline.at(x, y)) out.at(x, y) = color;
    }
  }
}

}  // namespace

RgbImage render_overlay(const Image& image, std::span<const LabeledObject> gt,
                        std::span<const LabeledObject> pred) {
  RgbImage out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const float v = std::clamp(image.at(x, y), 0.0F, 1.0F);
      const auto g = static_cast<std::uint8_t>(std::lround(v * 255.0F));
      out.at(x, y) = {g, g, g};
    }
  }
  for (const LabeledObject& o : pred) draw(out, o.ellipse, pred_color(o.class_id));
  for (const LabeledObject& o : gt) draw(out, o.ellipse, kRed);
  return out;
}

std::string overlay_svg(int width, int height, std::span<const LabeledObject> gt,
                        std::span<const LabeledObject> pred) {
  std::ostringstream svg;
  svg.precision(6);
  svg << std::fixed;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  auto shape = [&](const Ellipse& e, const Rgb& color) {
    const double cx = e.cx + 0.5;
    const double cy = e.cy + 0.5;
    svg << "  <ellipse cx=\"" << cx << "\" cy=\"" << cy << "\" rx=\"" << e.a << "\" ry=\""
        << e.b << "\" transform=\"rotate(" << e.theta * 180.0 / kPi << ' ' << cx << ' ' << cy
        << ")\" fill=\"none\" stroke=\"" << hex(color) << "\" stroke-width=\"1\"/>\n";
  };
  for (const LabeledObject& o : pred) shape(o.ellipse, pred_color(o.class_id));
  for (const LabeledObject& o : gt) shape(o.ellipse, kRed);
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace ellipsedet::cli

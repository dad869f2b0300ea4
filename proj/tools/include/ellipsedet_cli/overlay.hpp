#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "ellipsedet/dataset.hpp"

namespace ellipsedet::cli {

/// Grey image with one-pixel ellipse outlines: predictions first (thorax
/// cyan, heart green), ground truth on top in red.
RgbImage render_overlay(const Image& image, std::span<const LabeledObject> gt,
                        std::span<const LabeledObject> pred);

/// Vector version of the same drawing. Pixel centres sit at integer
/// coordinates, so shapes are shifted by half a pixel into SVG space.
std::string overlay_svg(int width, int height, std::span<const LabeledObject> gt,
                        std::span<const LabeledObject> pred);

}  // namespace ellipsedet::cli

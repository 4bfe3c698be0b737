#include "depthproj/targets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "depthproj/image_io.hpp"

namespace depthproj {

namespace {

// Smoothly interpolated lattice noise summed over octaves.
Image fractal_noise(std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Image out = Image::Zero(height, width);
  double amplitude = 1.0;
  int cells = 4;
  for (int octave = 0; octave < 5; ++octave, amplitude *= 0.5, cells *= 2) {
    const int gw = cells + 2;
    const int gh = std::max(2, cells * height / std::max(1, width)) + 2;
    Image lattice(gh, gw);
    for (Eigen::Index i = 0; i < lattice.size(); ++i) lattice.data()[i] = uni(rng);
    const double sx = static_cast<double>(cells) / width;
    for (int y = 0; y < height; ++y) {
      const double fy = (y + 0.5) * sx;
      const int y0 = std::min(static_cast<int>(fy), gh - 2);
      double ty = fy - y0;
      ty = ty * ty * (3 - 2 * ty);
      for (int x = 0; x < width; ++x) {
        const double fx = (x + 0.5) * sx;
        const int x0 = std::min(static_cast<int>(fx), gw - 2);
        double tx = fx - x0;
        tx = tx * tx * (3 - 2 * tx);
        const double v = (1 - ty) * ((1 - tx) * lattice(y0, x0) + tx * lattice(y0, x0 + 1)) +
                         ty * ((1 - tx) * lattice(y0 + 1, x0) + tx * lattice(y0 + 1, x0 + 1));
        out(y, x) += amplitude * v;
      }
    }
  }
  const double lo = out.minCoeff();
  const double hi = out.maxCoeff();
  if (hi > lo) out = ((out.array() - lo) * (255.0 / (hi - lo))).matrix();
  return out;
}

}  // namespace

std::vector<std::string> procedural_kinds() {
  return {"checker", "gradient", "noise", "disc", "ring", "bars", "cross", "constant"};
}

Image make_procedural(const std::string& kind, std::uint64_t seed, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("procedural target needs a positive size");
  Image img(height, width);
  const double w = width;
  const double h = height;
  const double m = std::min(w, h);
  if (kind == "checker") {
    const int cell = std::max(2, static_cast<int>(m / (4 + seed % 5)));
    const int phase = static_cast<int>(seed % static_cast<std::uint64_t>(cell));
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) img(y, x) = (((x + phase) / cell + (y + phase) / cell) % 2) ? 255.0 : 0.0;
    }
  } else if (kind == "gradient") {
    const double angle = static_cast<double>(seed % 360) * std::numbers::pi / 180.0;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double span = std::abs(c) * (w - 1) + std::abs(s) * (h - 1);
    const double lo = std::min(0.0, c * (w - 1)) + std::min(0.0, s * (h - 1));
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) img(y, x) = span > 0 ? 255.0 * (c * x + s * y - lo) / span : 0.0;
    }
  } else if (kind == "noise") {
    img = fractal_noise(seed, width, height);
  } else if (kind == "disc" || kind == "ring") {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    const double cx = w * (0.5 + jitter(rng));
    const double cy = h * (0.5 + jitter(rng));
    const double outer = 0.35 * m;
    const double inner = kind == "ring" ? 0.2 * m : -1.0;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double r = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
        img(y, x) = (r <= outer && r >= inner) ? 255.0 : 0.0;
      }
    }
  } else if (kind == "bars") {
    const int bars = 3 + static_cast<int>(seed % 4);
    const bool vertical = (seed / 4) % 2 == 0;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double t = vertical ? (x + 0.5) / w : (y + 0.5) / h;
        img(y, x) = (static_cast<int>(t * 2 * bars) % 2) ? 255.0 : 0.0;
      }
    }
  } else if (kind == "cross") {
    const double half = (0.08 + 0.02 * static_cast<double>(seed % 4)) * m;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const bool on = std::abs(x + 0.5 - w / 2) <= half || std::abs(y + 0.5 - h / 2) <= half;
        img(y, x) = on ? 255.0 : 0.0;
      }
    }
  } else if (kind == "constant") {
    img.setConstant(std::clamp(static_cast<double>(seed), 0.0, 255.0));
  } else {
    throw Error("unknown procedural target '" + kind + "'");
  }
  return img;
}

Image load_target(const std::string& source, const std::filesystem::path& base, int width, int height) {
  constexpr std::string_view prefix = "procedural:";
  if (source.starts_with(prefix)) {
    std::string rest = source.substr(prefix.size());
    // Optional placement box "@x0,y0,x1,y1" in fractions of the frame.
    std::array<double, 4> box{0.0, 0.0, 1.0, 1.0};
    if (const auto at = rest.find('@'); at != std::string::npos) {
      std::istringstream in(rest.substr(at + 1));
      char comma = ',';
      in >> box[0] >> comma >> box[1] >> comma >> box[2] >> comma >> box[3];
      if (!in || !(box[0] >= 0 && box[1] >= 0 && box[2] <= 1 && box[3] <= 1 && box[0] < box[2] && box[1] < box[3])) {
        throw Error("bad placement box in target source '" + source + "'");
      }
      rest.resize(at);
    }
    const auto colon = rest.find(':');
    const std::string kind = rest.substr(0, colon);
    std::uint64_t seed = 0;
    if (colon != std::string::npos) {
      try {
        seed = std::stoull(rest.substr(colon + 1));
      } catch (const std::exception&) {
        throw Error("bad seed in target source '" + source + "'");
      }
    }
    const int x0 = static_cast<int>(std::lround(box[0] * width));
    const int y0 = static_cast<int>(std::lround(box[1] * height));
    const int x1 = static_cast<int>(std::lround(box[2] * width));
    const int y1 = static_cast<int>(std::lround(box[3] * height));
    if (x1 <= x0 || y1 <= y0) throw Error("placement box of '" + source + "' is empty at this resolution");
    Image canvas = Image::Zero(height, width);
    canvas.block(y0, x0, y1 - y0, x1 - x0) = make_procedural(kind, seed, x1 - x0, y1 - y0);
    return canvas;
  }
  std::filesystem::path path(source);
  if (path.is_relative()) path = base / path;
  auto loaded = read_png(path);
  if (loaded.bit_depth == 16) loaded.pixels /= 257.0;
  if (loaded.pixels.rows() == height && loaded.pixels.cols() == width) return loaded.pixels;
  return resample(loaded.pixels, width, height);
}

}  // namespace depthproj

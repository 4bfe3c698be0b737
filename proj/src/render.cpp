#include "depthproj/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "depthproj/parallel.hpp"

namespace depthproj {

std::vector<RecombinedImage> render_patterns(const SceneDescription& scene, const InverseProjectionMap& q,
                                             std::span<const PatternImage> patterns, Convention convention,
                                             int threads) {
  const int J = q.projector_count();
  std::vector<const Image*> by_projector(static_cast<std::size_t>(J), nullptr);
  for (const auto& pat : patterns) {
    if (pat.projector < 0 || pat.projector >= J) throw std::invalid_argument("pattern for an unknown projector");
    const auto& res = scene.projectors[static_cast<std::size_t>(pat.projector)].device.resolution;
    if (pat.pixels.rows() != res.height || pat.pixels.cols() != res.width) {
      throw std::invalid_argument("pattern does not match the projector resolution");
    }
    by_projector[static_cast<std::size_t>(pat.projector)] = &pat.pixels;
  }

  const Resolution cres = q.camera();
  std::vector<RecombinedImage> out;
  for (const auto& surface : scene.surfaces) {
    out.push_back({surface.id, Image::Zero(cres.height, cres.width), Mask::Zero(cres.height, cres.width)});
  }
  const auto& samples = q.samples();
  parallel_for(
      0, static_cast<std::ptrdiff_t>(samples.size()), threads,
      [&](std::ptrdiff_t s) {
        const auto& sample = samples[static_cast<std::size_t>(s)];
        const double albedo = scene.surfaces[static_cast<std::size_t>(sample.surface)].albedo;
        const auto links = q.links(static_cast<std::size_t>(s));
        double value = 0.0;
        bool lit = false;
        for (int j = 0; j < J; ++j) {
          const auto& link = links[static_cast<std::size_t>(j)];
          if (link.pixel == 0) continue;
          lit = true;
          const Image* pattern = by_projector[static_cast<std::size_t>(j)];
          if (!pattern) continue;
          const double drive = std::max(0.0, pattern->data()[link.pixel - 1]);
          value += link_weight(link, albedo, convention, scene.reference_distance) * drive;
        }
        if (!lit) return;
        auto& img = out[static_cast<std::size_t>(sample.surface)];
        img.pixels.data()[sample.camera_index] = value;
        img.mask.data()[sample.camera_index] = 1;
      },
      1024);
  return out;
}

namespace {

void check_shapes(const Image& a, const Image& b, const Mask& mask) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != mask.rows() || a.cols() != mask.cols()) {
    throw std::invalid_argument("image and mask shapes differ");
  }
}

// Luminance * contrast-structure term of SSIM from window moments.
double ssim_from_moments(double n, double sx, double sy, double sxx, double syy, double sxy) {
  constexpr double L = 255.0;
  constexpr double C1 = (0.01 * L) * (0.01 * L);
  constexpr double C2 = (0.03 * L) * (0.03 * L);
  const double mx = sx / n;
  const double my = sy / n;
  const double vx = sxx / n - mx * mx;
  const double vy = syy / n - my * my;
  const double cxy = sxy / n - mx * my;
  return ((2.0 * mx * my + C1) * (2.0 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
}

}  // namespace

double psnr(const Image& reference, const Image& test, const Mask& mask) {
  check_shapes(reference, test, mask);
  double sum = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < reference.size(); ++i) {
    if (!mask.data()[i]) continue;
    const double d = reference.data()[i] - test.data()[i];
    sum += d * d;
    ++n;
  }
  if (n == 0) throw Error("PSNR over an empty mask");
  const double mse = sum / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const Image& reference, const Image& test, const Mask& mask) {
  check_shapes(reference, test, mask);
  const Eigen::Index h = reference.rows();
  const Eigen::Index w = reference.cols();
  if (mask.count() == 0) throw Error("SSIM over an empty mask");

  // Summed-area tables with a zero border; index (y, x) covers [0, y) x [0, x).
  using Table = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Table cnt = Table::Zero(h + 1, w + 1), sx = cnt, sy = cnt, sxx = cnt, syy = cnt, sxy = cnt;
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const bool m = mask(y, x) != 0;
      const double a = m ? reference(y, x) : 0.0;
      const double b = m ? test(y, x) : 0.0;
      auto acc = [&](Table& t, double v) { t(y + 1, x + 1) = v + t(y, x + 1) + t(y + 1, x) - t(y, x); };
      acc(cnt, m ? 1.0 : 0.0);
      acc(sx, a);
      acc(sy, b);
      acc(sxx, a * a);
      acc(syy, b * b);
      acc(sxy, a * b);
    }
  }
  constexpr int k = kSsimWindow;
  constexpr double full = k * k;
  double total = 0.0;
  long windows = 0;
  for (Eigen::Index y = 0; y + k <= h; ++y) {
    for (Eigen::Index x = 0; x + k <= w; ++x) {
      auto box = [&](const Table& t) { return t(y + k, x + k) - t(y, x + k) - t(y + k, x) + t(y, x); };
      if (box(cnt) != full) continue;
      total += ssim_from_moments(full, box(sx), box(sy), box(sxx), box(syy), box(sxy));
      ++windows;
    }
  }
  if (windows > 0) return total / static_cast<double>(windows);
  return ssim_from_moments(cnt(h, w), sx(h, w), sy(h, w), sxx(h, w), syy(h, w), sxy(h, w));
}

Image difference_image(const Image& a, const Image& b, const Mask& mask) {
  check_shapes(a, b, mask);
  return ((a - b).cwiseAbs().array() * mask.cast<double>().array()).matrix();
}

}  // namespace depthproj

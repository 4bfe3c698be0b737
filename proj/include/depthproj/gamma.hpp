#pragma once

#include <span>
#include <vector>

namespace depthproj {

/// Photometric response f(x) = a * x^b + c for nominal drive x in [0, 255].
struct GammaModel {
  double a = 1.0;
  double b = 1.0;
  double c = 0.0;

  [[nodiscard]] double operator()(double x) const;
  [[nodiscard]] bool is_monotone() const { return a > 0.0 && b > 0.0; }
};

struct GammaSample {
  double nominal;
  double measured;
};

struct GammaFit {
  GammaModel model;
  double rms = 0.0;
  int iterations = 0;
};

/// Least-squares fit of (a, b, c). Throws depthproj::Error with fewer than 8
/// samples, samples spanning less than half of [0, 255], or samples that
/// decrease by more than `monotone_tolerance` of the measured range.
GammaFit fit_gamma(std::span<const GammaSample> samples, double monotone_tolerance = 0.05);

/// Drive value x with f(x) = desired, clamped to [0, 255].
double invert_gamma(const GammaModel& model, double desired);

/// Drive value that makes the projector emit `linear` in [0, 255] on a linear
/// scale between f(0) and f(255).
double compensate(const GammaModel& model, double linear);

}  // namespace depthproj

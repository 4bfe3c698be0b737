#include "depthproj/gamma.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "depthproj/common.hpp"

namespace depthproj {

double GammaModel::operator()(double x) const { return a * std::pow(std::max(x, 0.0), b) + c; }

namespace {

double sum_squares(const GammaModel& m, std::span<const GammaSample> samples) {
  double s = 0.0;
  for (const auto& smp : samples) {
    const double r = m(smp.nominal) - smp.measured;
    s += r * r;
  }
  return s;
}

GammaModel log_domain_init(std::span<const GammaSample> samples) {
  double ymin = samples.front().measured;
  double ymax = ymin;
  for (const auto& s : samples) {
    ymin = std::min(ymin, s.measured);
    ymax = std::max(ymax, s.measured);
  }
  // Slightly below the darkest sample so that log(y - c) stays finite.
  const double c = ymin - 1e-3 * std::max(ymax - ymin, 1e-12);

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& s : samples) {
    if (s.nominal <= 0.0 || s.measured - c <= 0.0) continue;
    const double lx = std::log(s.nominal);
    const double ly = std::log(s.measured - c);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  GammaModel m{1.0, 1.0, c};
  const double den = n * sxx - sx * sx;
  if (n >= 2 && std::abs(den) > 1e-12) {
    m.b = (n * sxy - sx * sy) / den;
    m.a = std::exp((sy - m.b * sx) / n);
  }
  if (!(m.b > 0.0)) m.b = 1.0;
  if (!(m.a > 0.0)) m.a = 1.0;
  return m;
}

}  // namespace

GammaFit fit_gamma(std::span<const GammaSample> samples, double monotone_tolerance) {
  if (samples.size() < 8) throw Error("gamma fit needs at least 8 samples");

  std::vector<GammaSample> sorted(samples.begin(), samples.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const GammaSample& l, const GammaSample& r) { return l.nominal < r.nominal; });
  if (sorted.back().nominal - sorted.front().nominal < 0.5 * 255.0) {
    throw Error("gamma samples must span at least half of [0, 255]");
  }
  double ymin = sorted.front().measured, ymax = ymin;
  for (const auto& s : sorted) {
    if (!std::isfinite(s.nominal) || !std::isfinite(s.measured)) throw Error("non-finite gamma sample");
    ymin = std::min(ymin, s.measured);
    ymax = std::max(ymax, s.measured);
  }
  const double floor = monotone_tolerance * (ymax - ymin);
  double running_max = sorted.front().measured;
  for (const auto& s : sorted) {
    if (s.measured < running_max - floor) {
      throw Error("gamma samples are not monotone; check the photometric measurement");
    }
    running_max = std::max(running_max, s.measured);
  }

  GammaModel m = log_domain_init(sorted);
  double cost = sum_squares(m, sorted);
  double lambda = 1e-3;
  int it = 0;
  bool converged = false;
  while (!converged && it < 200) {
    ++it;
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (const auto& s : sorted) {
      const double xb = s.nominal > 0.0 ? std::pow(s.nominal, m.b) : 0.0;
      const double lx = s.nominal > 0.0 ? std::log(s.nominal) : 0.0;
      const Eigen::Vector3d j(xb, m.a * xb * lx, 1.0);
      const double r = m.a * xb + m.c - s.measured;
      jtj += j * j.transpose();
      jtr += j * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      Eigen::Matrix3d damped = jtj;
      damped.diagonal() *= (1.0 + lambda);
      const Eigen::Vector3d step = damped.ldlt().solve(-jtr);
      const GammaModel trial{m.a + step(0), m.b + step(1), m.c + step(2)};
      const double trial_cost = trial.is_monotone() ? sum_squares(trial, sorted) : cost + 1.0;
      if (trial_cost <= cost) {
        const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
        converged = rel < 1e-15 || step.norm() < 1e-13 * (1.0 + Eigen::Vector3d(m.a, m.b, m.c).norm());
        m = trial;
        cost = trial_cost;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return {m, std::sqrt(cost / static_cast<double>(sorted.size())), it};
}

double invert_gamma(const GammaModel& model, double desired) {
  const double base = (desired - model.c) / model.a;
  if (!(base > 0.0)) return 0.0;
  return std::clamp(std::pow(base, 1.0 / model.b), 0.0, 255.0);
}

double compensate(const GammaModel& model, double linear) {
  const double lo = model(0.0);
  const double hi = model(255.0);
  return invert_gamma(model, lo + (hi - lo) * std::clamp(linear, 0.0, 255.0) / 255.0);
}

}  // namespace depthproj

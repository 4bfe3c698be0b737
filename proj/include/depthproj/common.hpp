#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace depthproj {

/// Row-major raster: rows are image rows (y), columns are image columns (x).
template <typename Scalar>
using Raster = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Image = Raster<double>;
using Mask = Raster<std::uint8_t>;

struct Resolution {
  int width = 0;
  int height = 0;

  [[nodiscard]] Eigen::Index pixel_count() const {
    return static_cast<Eigen::Index>(width) * height;
  }
  [[nodiscard]] bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// Allowed drive range [a, b] for pattern pixels.
struct SolverBounds {
  double lower = 0.0;
  double upper = 255.0;

  void validate() const {
    if (!(lower < upper)) {
      throw std::invalid_argument("solver bounds require lower < upper");
    }
  }
};

/// Which way the attenuation coefficient couples drive values and received light.
///
/// Verbatim multiplies the drive value by d^2 / (L.N); Physical multiplies it
/// by (L.N) / d^2. Assembly and rendering always use the same convention.
enum class Convention { Verbatim, Physical };

inline std::string to_string(Convention c) {
  return c == Convention::Verbatim ? "verbatim" : "physical";
}

inline Convention convention_from_string(const std::string& s) {
  if (s == "verbatim") return Convention::Verbatim;
  if (s == "physical") return Convention::Physical;
  throw std::invalid_argument("unknown convention '" + s + "'");
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace depthproj

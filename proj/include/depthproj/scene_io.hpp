#pragma once

#include <filesystem>
#include <iosfwd>

#include "depthproj/scene.hpp"

namespace depthproj {

/// Reads a JSON scene. Relative depth-map and target paths are resolved
/// against the directory of `path`. The returned scene is prepared.
SceneDescription load_scene(const std::filesystem::path& path);
SceneDescription parse_scene(std::istream& in, const std::filesystem::path& base);

/// Writes the scene as JSON; height fields are stored inline.
void save_scene(const SceneDescription& scene, std::ostream& out);
void save_scene(const SceneDescription& scene, const std::filesystem::path& path);

/// Depth samples from a 16-bit PNG (multiplied by `scale`) or a text grid of
/// whitespace-separated values, one row per line.
Raster<double> load_depth_map(const std::filesystem::path& path, double scale = 1.0);

}  // namespace depthproj

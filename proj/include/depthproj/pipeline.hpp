#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "depthproj/calib.hpp"
#include "depthproj/gamma.hpp"
#include "depthproj/render.hpp"
#include "depthproj/scene.hpp"
#include "depthproj/solver.hpp"
#include "depthproj/system.hpp"

namespace depthproj {

// ------------------------------------------------------------------ demo scenes

enum class DemoKind { TwoPlanes, ThreePlanes, HeadAndBox };

DemoKind demo_kind_from_string(const std::string& name);
std::string to_string(DemoKind kind);

struct DemoParams {
  int projector_width = 256;
  int projector_height = 192;
  int camera_width = 400;
  int camera_height = 300;
  /// Vertical distance between the two projector centres, metres.
  double baseline = 0.1;
  std::uint64_t seed = 1;
};

/// Two projectors stacked vertically, both facing +z, and a camera between
/// them. two-planes: one screen placed at 0.8 m or at 1.0 m (two layers);
/// three-planes: boards at 0.8, 0.9 and 1.0 m standing side by side;
/// head-and-box: a bumpy height field in front of a plane at 1.0 m.
SceneDescription make_demo_scene(DemoKind kind, const DemoParams& params = {});

// ------------------------------------------------------------------- methods

struct MethodSpec {
  std::string label;  // "LF", "EO_0^255", "EO_-100^255", ...
  bool linear_factorization = false;
  SolverBounds bounds;

  /// Safe for file names: "lf", "eo_0_255", "eo_-100_255".
  [[nodiscard]] std::string slug() const;
};

/// "LF", "EO" (scene bounds) or "EO:<a>:<b>".
MethodSpec parse_method(const std::string& text, SolverBounds default_bounds);

// --------------------------------------------------------------------- stages

/// Error raised inside a pipeline stage; what() carries "[stage] message".
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error("[" + stage + "] " + message), stage_(std::move(stage)) {}
  [[nodiscard]] const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct CalibrationResult {
  std::vector<CorrespondenceMap> maps;  // one per (projector, layer)
  std::vector<GammaFit> gamma;          // one per projector, channel 0
};

struct CalibrationOptions {
  int threads = 0;
  /// Use projected geometry instead of simulated Gray-code decoding.
  bool geometric = false;
  int gamma_levels = 32;
  double gamma_noise = 0.002;
  std::uint64_t seed = 0;
};

CalibrationResult calibrate(const SceneDescription& scene, const CalibrationOptions& options = {});

std::vector<TargetImage> load_targets(const SceneDescription& scene, const std::filesystem::path& base);

/// Drive values sent to the projectors: gamma compensation with the fitted
/// response, rounded to 8 bits.
std::vector<PatternImage> export_patterns(std::span<const PatternImage> linear, std::span<const GammaFit> fits);

/// Linear intensity a projector actually emits for 8-bit drive values, on the
/// same [0,255] scale the solver works in.
std::vector<PatternImage> realize_patterns(const SceneDescription& scene, std::span<const PatternImage> drive);

struct MethodResult {
  MethodSpec method;
  std::vector<PatternImage> linear;  // solver output
  std::vector<PatternImage> drive;   // exported 8-bit values
  std::vector<RecombinedImage> recombined;
  std::vector<QualityRecord> quality;
  std::vector<ChainReport> chains;
  std::vector<std::string> warnings;
  double lf_scale = 1.0;
  double lf_offset = 0.0;
  double unconstrained_min = 0.0;
  double unconstrained_max = 0.0;
};

MethodResult run_method(const SceneDescription& scene, const SparseSystem& system, const InverseProjectionMap& q,
                        std::span<const TargetImage> targets, std::span<const GammaFit> gamma,
                        const MethodSpec& method, int threads = 0);

/// Scores recombined images against their targets over each mask.
std::vector<QualityRecord> score(std::span<const RecombinedImage> recombined, std::span<const TargetImage> targets,
                                 const std::string& method);

/// Range of solver values over columns used by the system.
std::pair<double, double> used_value_range(const SparseSystem& system, const Eigen::VectorXd& values);

// ------------------------------------------------------------- artifact names

std::string map_file(int projector, int layer);                  // corr_p0_l1.dpcm
std::string pattern_file(const std::string& slug, int projector);  // pattern_eo_0_255_p0.png
std::string recombined_file(const std::string& slug, int surface);
std::string difference_file(const std::string& slug, int surface);
std::string mask_file(const std::string& slug, int surface);

/// Reads every (projector, layer) map written by the calibrate verb.
std::vector<CorrespondenceMap> load_maps(const SceneDescription& scene, const std::filesystem::path& dir);

// ------------------------------------------------------------------ full run

struct RunConfig {
  std::filesystem::path scene_path;
  std::vector<std::string> methods{"LF", "EO"};
  std::optional<SolverBounds> bounds;  // overrides the scene bounds for "EO"
  std::filesystem::path output_dir = "out";
  Convention convention = Convention::Verbatim;
  int threads = 0;
  std::uint64_t seed = 0;
  bool geometric_calibration = false;
};

struct RunReport {
  std::vector<MethodResult> methods;
  std::filesystem::path metrics_path;
};

/// calibrate -> assemble -> solve per method -> gamma-compensate -> render ->
/// score, writing everything under output_dir. Any stage failure throws
/// StageError and leaves output_dir without new artifacts.
RunReport run_pipeline(const RunConfig& config, std::ostream& log);

}  // namespace depthproj

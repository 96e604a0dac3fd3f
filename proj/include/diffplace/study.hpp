#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "diffplace/ddpm.hpp"
#include "diffplace/synthgen.hpp"

namespace diffplace {

// Generalization sweeps: one trained model evaluated on circuits generated
// with one parameter varied away from the training distribution.
enum class StudyAxis { kEdges, kVertices, kScale, kEdgeDist };

std::string_view to_string(StudyAxis axis);
// Throws std::invalid_argument listing the valid axes.
StudyAxis study_axis_from_string(std::string_view name);

struct StudyPoint {
  std::string label;
  double value = 0.0;  // position on the x axis (index for edge-dist)
  SynthParams params;
};

// Grid values per axis:
//   edges     gamma coefficient (edge density)
//   vertices  target object count; object sizes shrink as sqrt(ref / count)
//   scale     edge-length scale s
//   edge-dist exponential | sigmoid | linear
std::vector<StudyPoint> study_grid(StudyAxis axis, const SynthParams& base, const std::vector<std::string>& values);

struct StudyOptions {
  std::size_t count = 16;  // circuits per grid point and seed
  std::size_t seeds = 1;
  std::uint64_t seed = 0;
  std::optional<GuidanceConfig> guidance;
};

struct StudyRow {
  std::string axis;
  std::string label;
  double value = 0.0;
  std::size_t seed_index = 0;
  std::size_t circuits = 0;
  double mean_objects = 0.0;
  double mean_edges = 0.0;
  double median_legality = 0.0;
  double mean_legality = 0.0;
  double hpwl_ratio = 0.0;  // sum of sampled HPWL over sum of reference HPWL
};

// Circuit i of seed k comes from derive_seed(seed, "study", k) and index i at
// every grid point, so points differ only by the swept parameter.
std::vector<StudyRow> run_study(const Denoiser& model, const NoiseSchedule& schedule, StudyAxis axis,
                                const std::vector<StudyPoint>& grid, const StudyOptions& options);

std::string study_csv(const std::vector<StudyRow>& rows);
// Two line charts (median legality, HPWL ratio) averaged over seeds.
std::string study_svg(const std::vector<StudyRow>& rows);

}  // namespace diffplace

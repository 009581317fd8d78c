#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "oodbench/image.hpp"

namespace oodbench::art {

enum class Family {
  CircleHard,
  CircleSmooth,
  BlackStripe,
  PatchSwap,
  Blur,
  Noise,
  Elastic,
  Motion,
  BiasField,
  Ghosting,
  Spike,
};

const char* family_name(Family f);
Family family_from_name(const std::string& name);

/// Local families carry a meaningful per-pixel ground-truth mask; global
/// families corrupt the whole slice and get an empty mask.
bool is_local(Family f);

struct ArtifactParams {
  Family family = Family::Blur;
  std::vector<std::pair<std::string, double>> params;
  std::uint64_t seed = 0;

  double get(const std::string& name) const;
  std::string to_string() const;  // "name=value;..." with stable formatting
};

struct ArtifactResult {
  Image2D image;
  Mask2D gt_mask;
};

/// Applies one corruption to a [0, 1] slice. Local families edit pixels in
/// place; global families run through their transform and are then min-max
/// renormalized, mirroring a volume-level normalization side effect that can
/// also disturb background intensities.
ArtifactResult apply_artifact(const Image2D& im, const ArtifactParams& p);

/// Severity grids: every parameter is swept linearly from min to max and
/// multi-parameter families take the cross product. Pixel-unit geometry
/// (circle radius, patch size, elastic displacement) is defined at a 256 px
/// reference resolution and scales with image_size.
std::vector<ArtifactParams> sweep_grid(Family f, int image_size = 256);

/// Random circle parameters for the homogeneous-circle set: radius uniform
/// in [20, 40] (scaled from the 256 px reference), intensity uniform in
/// [0, 1).
ArtifactParams circ_params(std::uint64_t seed, int image_size = 256);

/// Min-max rescale applied after every global corruption.
Image2D renormalize_global(const Image2D& im);

}  // namespace oodbench::art

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "oodbench/image.hpp"

namespace oodbench::data {

struct PhantomConfig {
  int size = 64;
  std::uint64_t seed = 0;
  int n_subjects = 48;
  int slices_per_subject = 5;
};

/// In-memory slice collection. Ids are stable and sorted, so corpus order is
/// reproducible and never depends on filesystem enumeration order.
struct Corpus {
  std::string role;
  int width = 0;
  int height = 0;
  std::vector<std::string> ids;
  std::vector<int> subject_of;  // -1 for externally loaded slices
  std::vector<Image2D> images;

  std::size_t size() const { return images.size(); }
};

/// Renders one synthetic head slice. Pure function of (config, subject,
/// slice): subject keys anatomy, slice keys small perturbations. Background
/// is exactly zero and values span [0, 1] exactly.
Image2D generate_phantom(const PhantomConfig& cfg, int subject, int slice);

/// Subject-level split: a subject's slices never straddle the two roles.
/// Subject assignment uses a seeded shuffle; both corpora keep ascending
/// (subject, slice) order.
std::pair<Corpus, Corpus> make_split_corpora(const PhantomConfig& cfg, double train_fraction);

/// Writes <root>/<role>/<id>.f32 (+ sidecars) and a manifest listing the ids.
/// Extra fields are merged into the manifest.
void save_corpus(const Corpus& corpus, const std::filesystem::path& root,
                 const nlohmann::ordered_json& extra = {});

/// Loads every .f32 (with sidecar) or .pgm image in a directory, sorted by
/// filename. All slices must share one size; each is min-max normalized.
Corpus load_corpus_dir(const std::filesystem::path& dir, const std::string& role);

}  // namespace oodbench::data

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "caf/image.hpp"
#include "caf/rle.hpp"

namespace caf {

struct SynthSpec {
  uint32_t num_classes = 5;
  uint32_t patients_per_class = 50;
  std::array<uint32_t, 2> images_per_patient{1, 3};
  uint32_t image_size = 128;  // H == W
  std::array<double, 2> lesion_area_fraction{0.01, 0.05};
  double background_noise_sigma = 0.10;
  std::array<uint32_t, 2> distractor_count{2, 5};
  uint64_t seed = 1;

  void validate() const;  // throws invalid_argument / infeasible_geometry
  uint32_t num_patients() const { return num_classes * patients_per_class; }
};

// Ground truth for the single lesion in a generated image.
struct LesionTruth {
  uint32_t patient_id = 0;
  uint32_t image_id = 0;
  int32_t label = -1;
  std::array<float, 4> bbox{};  // [x0,y0,x1,y1) pixels
  RleMask mask;
  uint32_t area = 0;  // mask pixel count
};

struct SynthItem {
  Image image;
  LesionTruth truth;
};

// Class recipe: a radial chroma pattern plus a tone offset relative to the
// patient skin tone. Luminance carries no class information by construction,
// so a luminance-threshold extractor finds lesions without seeing the label.
struct ClassRecipe {
  int pattern = 0;      // 0 = core, 1 = ring, 2 = flat
  double tone_delta = 0.0;
};
ClassRecipe class_recipe(uint32_t label);

// Deterministic single-image generation; all randomness is derived from
// (spec.seed, patient_id, image_id), so images can be produced in any order.
SynthItem generate_image(const SynthSpec& spec, uint32_t patient_id, uint32_t image_id,
                         int32_t label);

// Patient table: label and image-id range per patient, derived from the seed.
struct PatientPlan {
  uint32_t patient_id = 0;
  int32_t label = -1;
  uint32_t first_image_id = 0;
  uint32_t image_count = 0;
};
std::vector<PatientPlan> plan_patients(const SynthSpec& spec);

// Streams every image in (patient_id, image_id) order.
void for_each_synth_image(const SynthSpec& spec,
                          const std::function<void(const SynthItem&)>& fn);

struct SynthDataset {
  std::vector<SynthItem> items;
};
SynthDataset generate_synthetic(const SynthSpec& spec);

}  // namespace caf

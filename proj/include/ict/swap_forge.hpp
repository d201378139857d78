#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ict/face_synth.hpp"
#include "ict/geometry.hpp"
#include "ict/image.hpp"

namespace ict {

// Soft inner-face mask in [0,1]; 1 = source (inner) region.
using SwapMask = MaskImage;

// Index of the pose-closest candidate with a different identity (mean squared
// landmark distance, ties to the lowest index).
int find_pose_match(const FaceImage& query, const std::vector<FaceImage>& candidates);

// Binary mask = filled convex hull of all landmarks.
SwapMask build_hull_mask(const LandmarkSet& landmarks, int width, int height);

// Deterministic deformation core: piecewise-affine warp driven by a
// kGridN x kGridN control grid of pixel offsets, then Gaussian blur. Blur is
// skipped for sigma below 0.05.
constexpr int kDeformGridN = 4;
SwapMask deform_mask_with(const SwapMask& mask, const std::vector<Vec2>& grid_offsets,
                          double blur_sigma);

// Seeded deformation: offsets uniform within +-8% of the mask support's
// bounding-box diagonal, blur sigma uniform in [3, 9] px.
SwapMask deform_mask(const SwapMask& mask, std::uint64_t rng_seed);

// Separable Gaussian blur with zero padding (masks are 0 outside support).
MaskImage blur_mask(const MaskImage& mask, double sigma);

// Per channel: source + boxmean(target) - boxmean(source), clamped, applied
// where mask > 0. Box radius defaults to 15 px at 112-wide images and scales
// proportionally.
Image8 color_correct(const Image8& source, const Image8& target, const SwapMask& mask,
                     int radius);
int default_box_radius(int width, int height);

// mask*source + (1-mask)*target, rounded per channel.
Image8 blend_swap(const Image8& source, const Image8& target, const SwapMask& mask);

struct ForgeOptions {
    bool deform = true;          // Table-3 style ablation switch
    bool color_correct = true;   // Table-3 style ablation switch
    int candidate_pool = 200;    // pose-match search scope per query
};

struct FakeMetaRow {
    std::string path;
    std::string mask_path;
    int inner_identity = 0;
    int outer_identity = 0;
    std::string partner_path;
};

struct ForgeManifest {
    std::string root;
    std::string meta_path;
    int n_pairs = 0;
    int total_images = 0;
};

// For each sampled pose-matched real pair emits both swap directions with
// cross-linked partner paths: fake/<n>.ppm, masks/<n>.pgm, fake_meta.jsonl.
ForgeManifest generate_training_pairs(const std::string& real_root,
                                      const std::string& real_meta_path, int n_pairs,
                                      std::uint64_t rng_seed, const std::string& out_dir,
                                      const ForgeOptions& options = {});

std::vector<FakeMetaRow> load_fake_meta(const std::string& meta_path);

}  // namespace ict

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ict/geometry.hpp"
#include "ict/image.hpp"

namespace ict {

// 16 ordered points in pixel units: 8 face-oval points, 2 eye centers,
// 2 outer eye corners, 1 nose tip, 3 mouth points.
constexpr int kLandmarkCount = 16;
using LandmarkSet = std::vector<Vec2>;

constexpr int kOvalLandmarks = 8;
constexpr int kEyeCenterLeft = 8;
constexpr int kEyeCenterRight = 9;
constexpr int kEyeCornerLeft = 10;
constexpr int kEyeCornerRight = 11;
constexpr int kNoseTip = 12;
constexpr int kMouthLeft = 13;
constexpr int kMouthRight = 14;
constexpr int kMouthCenter = 15;

// 24 coefficients controlling one synthetic identity. Geometry lengths are
// fractions of min(width, height); colors are in [0,1] and scale to 0..255.
struct IdentityParams {
    static constexpr int kCount = 24;
    // index, meaning, [lo, hi]:
    //  0 oval_rx        [0.190, 0.235]   face half-width
    //  1 oval_ry        [0.240, 0.290]   face half-height
    //  2 eye_spacing    [0.070, 0.100]   eye-center offset from midline
    //  3 eye_size       [0.020, 0.032]   iris-scale unit
    //  4 eye_r          [0.05, 0.95]
    //  5 eye_g          [0.05, 0.95]
    //  6 eye_b          [0.05, 0.95]
    //  7 nose_width     [0.040, 0.080]
    //  8 nose_length    [0.060, 0.100]
    //  9 mouth_width    [0.100, 0.180]
    // 10 mouth_curve    [-0.5, 0.5]      negative = frown, positive = smile
    // 11 skin_r         [0.25, 0.95]
    // 12 skin_g         [0.20, 0.85]
    // 13 skin_b         [0.15, 0.80]
    // 14 hair_r         [0.02, 0.95]
    // 15 hair_g         [0.02, 0.85]
    // 16 hair_b         [0.02, 0.90]
    // 17 hair_amp       [0.00, 0.08]     wave amplitude of the hair outline
    // 18 brow_thick     [0.008, 0.020]
    // 19 eye_y          [-0.100, -0.050] eye line above center
    // 20 mouth_y        [0.120, 0.160]   mouth line below center
    // 21 hair_wave      [4.0, 9.0]       wave count of the hair outline
    // 22 jaw_pinch      [0.00, 0.25]     narrows the lower oval
    // 23 mouth_thick    [0.008, 0.014]   half band thickness
    std::array<double, kCount> coeffs{};

    static const std::array<std::array<double, 2>, kCount>& ranges();
    bool within_ranges() const;
};

struct PoseParams {
    double yaw = 0.0;      // horizontal landmark shear, [-0.3, 0.3]
    double rot_deg = 0.0;  // in-plane rotation, [-10, 10]
    double scale = 1.0;    // [0.9, 1.1]
    double gain = 1.0;     // lighting gain, [0.8, 1.2]
};

struct FaceImage {
    Image8 image;
    LandmarkSet landmarks;
    int identity = 0;
};

IdentityParams sample_identity(std::uint64_t seed);
PoseParams sample_pose(std::uint64_t seed);

// Canonical-space landmarks mapped through the pose transform; exposed so
// tests can verify the render agrees with the analytic geometry.
Affine2 pose_transform(const PoseParams& pose, int width, int height);
LandmarkSet face_landmarks(const IdentityParams& id, const PoseParams& pose, int width,
                           int height);

FaceImage render_face(const IdentityParams& id, const PoseParams& pose, int width, int height);

struct RealMetaRow {
    std::string path;  // relative to the dataset root
    int identity = 0;
    LandmarkSet landmarks;
    PoseParams pose;
};

struct DatasetManifest {
    std::string root;
    std::string meta_path;
    int n_identities = 0;
    int images_per_identity = 0;
    int total_images = 0;
};

// Writes real/<id>/<k>.ppm plus real_meta.jsonl under out_dir. Labels start
// at id_base so disjoint train/test identity ranges can share one seed.
DatasetManifest generate_dataset(int n_identities, int images_per_identity,
                                 std::uint64_t rng_seed, const std::string& out_dir,
                                 int width = 112, int height = 112, int id_base = 0);

std::vector<RealMetaRow> load_real_meta(const std::string& meta_path);
FaceImage load_face(const std::string& root, const RealMetaRow& row);

}  // namespace ict

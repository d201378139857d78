#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "doctest.h"
#include "ict/face_synth.hpp"
#include "ict/geometry.hpp"
#include "ict/rng.hpp"

using namespace ict;
namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::uint64_t h = 1469598103934665603ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

PoseParams neutral_pose() { return PoseParams{}; }

double pixel_l2(const Image8& a, const Image8& b) {
    REQUIRE(a.pixels.size() == b.pixels.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// 4x-downsampled RGB feature vector for the nearest-centroid sanity checks.
std::vector<double> downsample_features(const Image8& img) {
    const int block = 4;
    const int gw = img.width / block, gh = img.height / block;
    std::vector<double> f;
    f.reserve(static_cast<std::size_t>(gw) * gh * 3);
    for (int gy = 0; gy < gh; ++gy)
        for (int gx = 0; gx < gw; ++gx)
            for (int ch = 0; ch < 3; ++ch) {
                double s = 0.0;
                for (int y = 0; y < block; ++y)
                    for (int x = 0; x < block; ++x)
                        s += img.at(gx * block + x, gy * block + y, ch);
                f.push_back(s / (block * block));
            }
    return f;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

void mask_inner_region(Image8& img, const LandmarkSet& lm) {
    std::vector<Vec2> inner(lm.begin() + kOvalLandmarks, lm.end());
    const auto hull = convex_hull(inner);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (point_in_convex_polygon(hull, {x + 0.5, y + 0.5}))
                for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = 128;
}

// Clean renders with a little pose jitter and neutral lighting so the probe
// is not trivially comparing identical images.
PoseParams jittered_pose(std::uint64_t seed) {
    Rng rng(seed);
    PoseParams pose;
    pose.yaw = rng.uniform(-0.08, 0.08);
    pose.rot_deg = rng.uniform(-2.5, 2.5);
    pose.scale = rng.uniform(0.98, 1.02);
    pose.gain = 1.0;
    return pose;
}

// Nearest-centroid identity accuracy; centroids from even-indexed renders,
// queries from odd-indexed ones. Optionally blanks the inner-face region.
double centroid_accuracy(int n_ids, bool mask_inner) {
    const int per_id = 6, size = 56;
    std::vector<std::vector<std::vector<double>>> feats(n_ids);
    for (int k = 0; k < n_ids; ++k) {
        const IdentityParams id = sample_identity(derive_seed(777, k, 1));
        for (int j = 0; j < per_id; ++j) {
            FaceImage face = render_face(id, jittered_pose(derive_seed(777, k, j, 2)), size, size);
            if (mask_inner) mask_inner_region(face.image, face.landmarks);
            feats[k].push_back(downsample_features(face.image));
        }
    }
    std::vector<std::vector<double>> centroids(n_ids);
    for (int k = 0; k < n_ids; ++k) {
        centroids[k].assign(feats[k][0].size(), 0.0);
        for (int j = 0; j < per_id; j += 2)
            for (std::size_t i = 0; i < centroids[k].size(); ++i)
                centroids[k][i] += feats[k][j][i] / (per_id / 2);
    }
    int correct = 0, total = 0;
    for (int k = 0; k < n_ids; ++k) {
        for (int j = 1; j < per_id; j += 2) {
            int best = -1;
            double bestd = 0.0;
            for (int c = 0; c < n_ids; ++c) {
                const double d = sq_dist(feats[k][j], centroids[c]);
                if (best < 0 || d < bestd) {
                    best = c;
                    bestd = d;
                }
            }
            correct += (best == k);
            ++total;
        }
    }
    return static_cast<double>(correct) / total;
}

}  // namespace

TEST_CASE("identity sampling is deterministic and in range") {
    const IdentityParams a = sample_identity(42);
    const IdentityParams b = sample_identity(42);
    CHECK(a.coeffs == b.coeffs);

    for (int s = 0; s < 1000; ++s) CHECK(sample_identity(derive_seed(5, s)).within_ranges());

    const IdentityParams c = sample_identity(43);
    CHECK(a.coeffs != c.coeffs);
}

TEST_CASE("rendering is deterministic") {
    const IdentityParams id = sample_identity(11);
    const PoseParams pose = sample_pose(12);
    const FaceImage f1 = render_face(id, pose, 56, 56);
    const FaceImage f2 = render_face(id, pose, 56, 56);
    CHECK(f1.image.pixels == f2.image.pixels);
    REQUIRE(f1.landmarks.size() == kLandmarkCount);
    for (int i = 0; i < kLandmarkCount; ++i) {
        CHECK(f1.landmarks[i].x == f2.landmarks[i].x);
        CHECK(f1.landmarks[i].y == f2.landmarks[i].y);
    }
}

TEST_CASE("pose rotation moves landmarks by the same transform") {
    const IdentityParams id = sample_identity(21);
    PoseParams base = neutral_pose();
    PoseParams rotated = base;
    rotated.rot_deg = 10.0;
    const int w = 112, h = 112;
    const LandmarkSet lm0 = face_landmarks(id, base, w, h);
    const LandmarkSet lm1 = face_landmarks(id, rotated, w, h);
    const Affine2 rot = Affine2::rotation_deg(10.0);
    for (int i = 0; i < kLandmarkCount; ++i) {
        const Vec2 centered{lm0[i].x - w * 0.5, lm0[i].y - h * 0.5};
        const Vec2 expect = rot.apply_linear(centered) + Vec2{w * 0.5, h * 0.5};
        CHECK(std::abs(lm1[i].x - expect.x) < 0.5);
        CHECK(std::abs(lm1[i].y - expect.y) < 0.5);
    }
}

TEST_CASE("lighting gain scales quantized pixels exactly and keeps landmarks") {
    const IdentityParams id = sample_identity(31);
    PoseParams clean = neutral_pose();
    PoseParams lit = clean;
    lit.gain = 1.17;
    const FaceImage f0 = render_face(id, clean, 56, 56);
    const FaceImage f1 = render_face(id, lit, 56, 56);
    for (std::size_t i = 0; i < f0.image.pixels.size(); ++i) {
        const long expect = std::clamp(std::lround(f0.image.pixels[i] * 1.17), 0l, 255l);
        CHECK(static_cast<long>(f1.image.pixels[i]) == expect);
    }
    for (int i = 0; i < kLandmarkCount; ++i) {
        CHECK(f0.landmarks[i].x == f1.landmarks[i].x);
        CHECK(f0.landmarks[i].y == f1.landmarks[i].y);
    }
}

TEST_CASE("eye-center landmark sits on the rendered iris centroid") {
    // identity with a dark iris against pale skin so iris pixels are isolable
    IdentityParams id = sample_identity(41);
    id.coeffs[4] = 0.06;  // near-black iris
    id.coeffs[5] = 0.06;
    id.coeffs[6] = 0.92;  // strongly blue
    id.coeffs[11] = 0.93; // pale skin
    id.coeffs[12] = 0.80;
    id.coeffs[13] = 0.72;
    const int w = 112, h = 112;
    const FaceImage f = render_face(id, neutral_pose(), w, h);
    const Vec2 left = f.landmarks[kEyeCenterLeft];

    double sx = 0, sy = 0, n = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // bluish-dark pixels near the left eye
            if (std::abs(x + 0.5 - left.x) > 8 || std::abs(y + 0.5 - left.y) > 8) continue;
            if (f.image.at(x, y, 2) > 150 && f.image.at(x, y, 0) < 100) {
                sx += x + 0.5;
                sy += y + 0.5;
                n += 1;
            }
        }
    REQUIRE(n > 0);
    CHECK(std::abs(sx / n - left.x) < 1.0);
    CHECK(std::abs(sy / n - left.y) < 1.0);
}

TEST_CASE("landmarks stay in bounds and the oval hull contains inner points") {
    for (int trial = 0; trial < 300; ++trial) {
        const IdentityParams id = sample_identity(derive_seed(61, trial));
        const PoseParams pose = sample_pose(derive_seed(62, trial));
        const int w = 56, h = 56;
        const LandmarkSet lm = face_landmarks(id, pose, w, h);
        REQUIRE(lm.size() == kLandmarkCount);
        for (const Vec2& p : lm) {
            CHECK(p.x >= 0.0);
            CHECK(p.x < w);
            CHECK(p.y >= 0.0);
            CHECK(p.y < h);
        }
        const std::vector<Vec2> oval(lm.begin(), lm.begin() + kOvalLandmarks);
        const auto hull = convex_hull(oval);
        for (int i = kOvalLandmarks; i < kLandmarkCount; ++i)
            CHECK(point_in_convex_polygon(hull, lm[i]));
    }
}

TEST_CASE("generate_dataset writes the expected files and is reproducible") {
    const fs::path dir1 = fs::temp_directory_path() / "ict_synth_test_a";
    const fs::path dir2 = fs::temp_directory_path() / "ict_synth_test_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    const DatasetManifest man = generate_dataset(5, 4, 99, dir1.string(), 56, 56);
    CHECK(man.total_images == 20);
    int files = 0;
    for (auto& e : fs::recursive_directory_iterator(dir1))
        if (e.path().extension() == ".ppm") ++files;
    CHECK(files == 20);

    const auto rows = load_real_meta(man.meta_path);
    REQUIRE(rows.size() == 20);
    std::set<int> ids;
    for (const auto& row : rows) {
        ids.insert(row.identity);
        REQUIRE(row.landmarks.size() == kLandmarkCount);
        for (const Vec2& p : row.landmarks) {
            CHECK(p.x >= 0.0);
            CHECK(p.x < 56);
            CHECK(p.y >= 0.0);
            CHECK(p.y < 56);
        }
        const std::vector<Vec2> oval(row.landmarks.begin(),
                                     row.landmarks.begin() + kOvalLandmarks);
        const auto hull = convex_hull(oval);
        for (int i = kOvalLandmarks; i < kLandmarkCount; ++i)
            CHECK(point_in_convex_polygon(hull, row.landmarks[i]));
        // image on disk matches a fresh render of the recorded identity/pose
        const FaceImage loaded = load_face(dir1.string(), row);
        CHECK(loaded.image.width == 56);
    }
    CHECK(ids.size() == 5);

    const DatasetManifest man2 = generate_dataset(5, 4, 99, dir2.string(), 56, 56);
    CHECK(fnv1a_file(man.meta_path) == fnv1a_file(man2.meta_path));
    CHECK(fnv1a_file((dir1 / "real/2/3.ppm").string()) ==
          fnv1a_file((dir2 / "real/2/3.ppm").string()));

    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("identity labels honor id_base") {
    const fs::path dir = fs::temp_directory_path() / "ict_synth_test_base";
    fs::remove_all(dir);
    generate_dataset(3, 2, 7, dir.string(), 56, 56, 100);
    const auto rows = load_real_meta((dir / "real_meta.jsonl").string());
    for (const auto& row : rows) {
        CHECK(row.identity >= 100);
        CHECK(row.identity < 103);
    }
    fs::remove_all(dir);
}

TEST_CASE("clean renders separate identities with a nearest-centroid probe") {
    CHECK(centroid_accuracy(50, false) > 0.95);
}

TEST_CASE("outer region alone still separates identities") {
    CHECK(centroid_accuracy(50, true) > 0.80);
}

TEST_CASE("a 5% shift in any geometry coefficient changes the clean render") {
    const int geometry_coeffs[] = {0, 1, 2, 3, 7, 8, 9, 10, 17, 18, 19, 20, 21, 22, 23};
    const IdentityParams base = sample_identity(71);
    const Image8 ref = render_face(base, neutral_pose(), 112, 112).image;
    const auto& ranges = IdentityParams::ranges();
    for (int idx : geometry_coeffs) {
        IdentityParams shifted = base;
        const double span = ranges[static_cast<std::size_t>(idx)][1] -
                            ranges[static_cast<std::size_t>(idx)][0];
        const double delta = 0.05 * span;
        double v = base.coeffs[static_cast<std::size_t>(idx)] + delta;
        if (v > ranges[static_cast<std::size_t>(idx)][1]) v = base.coeffs[static_cast<std::size_t>(idx)] - delta;
        shifted.coeffs[static_cast<std::size_t>(idx)] = v;
        const Image8 img = render_face(shifted, neutral_pose(), 112, 112).image;
        INFO("coefficient ", idx);
        CHECK(pixel_l2(ref, img) > 0.0);
    }
}

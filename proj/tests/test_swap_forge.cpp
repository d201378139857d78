#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <map>
#include <vector>

#include "doctest.h"
#include "ict/degrade.hpp"
#include "ict/errors.hpp"
#include "ict/face_synth.hpp"
#include "ict/rng.hpp"
#include "ict/swap_forge.hpp"

using namespace ict;
namespace fs = std::filesystem;

namespace {

Image8 random_image(Rng& rng, int w, int h) {
    Image8 img(w, h);
    for (auto& b : img.pixels) b = static_cast<std::uint8_t>(rng.uniform_int(256));
    return img;
}

FaceImage synthetic_face(int identity, std::uint64_t seed, int size = 56) {
    FaceImage f = render_face(sample_identity(derive_seed(seed, identity)),
                              sample_pose(derive_seed(seed, identity, 7)), size, size);
    f.identity = identity;
    return f;
}

double point_segment_dist(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    double t = len2 > 0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 q = a + t * ab;
    return std::hypot(p.x - q.x, p.y - q.y);
}

}  // namespace

TEST_CASE("find_pose_match picks the identical-pose candidate at distance zero") {
    FaceImage query = synthetic_face(0, 1);
    std::vector<FaceImage> candidates;
    candidates.push_back(synthetic_face(1, 2));
    FaceImage twin = query;
    twin.identity = 5;  // same landmarks, different identity
    candidates.push_back(twin);
    candidates.push_back(synthetic_face(2, 3));
    CHECK(find_pose_match(query, candidates) == 1);
}

TEST_CASE("find_pose_match errors when all candidates share the identity") {
    FaceImage query = synthetic_face(0, 1);
    std::vector<FaceImage> candidates{synthetic_face(0, 4), synthetic_face(0, 5)};
    CHECK_THROWS_AS(find_pose_match(query, candidates), NoMatchError);
}

TEST_CASE("find_pose_match agrees with an exhaustive scan oracle") {
    for (int trial = 0; trial < 20; ++trial) {
        FaceImage query = synthetic_face(0, derive_seed(10, trial));
        std::vector<FaceImage> candidates;
        for (int i = 0; i < 10; ++i)
            candidates.push_back(synthetic_face(i % 4, derive_seed(11, trial, i)));

        int expect = -1;
        double best = 0.0;
        for (int i = 0; i < 10; ++i) {
            if (candidates[i].identity == query.identity) continue;
            double d = 0.0;
            for (int p = 0; p < kLandmarkCount; ++p) {
                const double dx = candidates[i].landmarks[p].x - query.landmarks[p].x;
                const double dy = candidates[i].landmarks[p].y - query.landmarks[p].y;
                d += dx * dx + dy * dy;
            }
            d /= kLandmarkCount;
            if (expect < 0 || d < best) {
                expect = i;
                best = d;
            }
        }
        CHECK(find_pose_match(query, candidates) == expect);
    }
}

TEST_CASE("hull mask of a triangle matches a scanline rasterizer oracle") {
    const std::vector<Vec2> tri{{8.3, 6.1}, {40.7, 12.9}, {20.2, 44.5}};
    const SwapMask mask = build_hull_mask(tri, 48, 48);

    // scanline oracle
    SwapMask oracle(48, 48);
    for (int y = 0; y < 48; ++y) {
        const double cy = y + 0.5;
        std::vector<double> xs;
        for (int e = 0; e < 3; ++e) {
            const Vec2 a = tri[e], b = tri[(e + 1) % 3];
            if ((a.y <= cy && b.y > cy) || (b.y <= cy && a.y > cy))
                xs.push_back(a.x + (cy - a.y) / (b.y - a.y) * (b.x - a.x));
        }
        if (xs.size() < 2) continue;
        std::sort(xs.begin(), xs.end());
        for (int x = 0; x < 48; ++x)
            if (x + 0.5 >= xs.front() && x + 0.5 <= xs.back()) oracle.at(x, y) = 1.0;
    }

    int differing = 0;
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            if (mask.at(x, y) != oracle.at(x, y)) {
                ++differing;
                double d = 1e9;
                for (int e = 0; e < 3; ++e)
                    d = std::min(d, point_segment_dist({x + 0.5, y + 0.5}, tri[e], tri[(e + 1) % 3]));
                CHECK(d < 1.0);  // disagreements only at the boundary
            }
    CHECK(differing < 30);
}

TEST_CASE("hull mask rejects collinear landmarks") {
    const std::vector<Vec2> line{{1, 1}, {5, 5}, {9, 9}, {13, 13}};
    CHECK_THROWS_AS(build_hull_mask(line, 20, 20), DegenerateGeometryError);
}

TEST_CASE("every inner landmark lies in the mask interior") {
    for (int trial = 0; trial < 10; ++trial) {
        const FaceImage f = synthetic_face(trial, derive_seed(21, trial));
        const SwapMask mask = build_hull_mask(f.landmarks, 56, 56);
        for (int i = kOvalLandmarks; i < kLandmarkCount; ++i) {
            const int x = static_cast<int>(f.landmarks[i].x);
            const int y = static_cast<int>(f.landmarks[i].y);
            CHECK(mask.at(x, y) == 1.0);
        }
    }
}

TEST_CASE("identity deformation leaves the mask unchanged") {
    const FaceImage f = synthetic_face(0, 31);
    const SwapMask mask = build_hull_mask(f.landmarks, 56, 56);
    const std::vector<Vec2> zero(static_cast<std::size_t>(kDeformGridN * kDeformGridN));
    const SwapMask out = deform_mask_with(mask, zero, 0.0);
    for (std::size_t i = 0; i < mask.values.size(); ++i)
        CHECK(std::abs(out.values[i] - mask.values[i]) <= 1.0 / 255.0);
}

TEST_CASE("deformed masks stay in [0,1] and keep a soft boundary") {
    for (int trial = 0; trial < 8; ++trial) {
        const FaceImage f = synthetic_face(trial, derive_seed(41, trial));
        const SwapMask mask = build_hull_mask(f.landmarks, 56, 56);
        const SwapMask out = deform_mask(mask, derive_seed(42, trial));
        int soft = 0;
        for (double v : out.values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            soft += (v > 0.0 && v < 1.0);
        }
        CHECK(soft > 0);
    }
}

TEST_CASE("separable mask blur matches a direct 2-D convolution oracle") {
    SwapMask step(24, 24);
    for (int y = 0; y < 24; ++y)
        for (int x = 12; x < 24; ++x) step.at(x, y) = 1.0;
    const double sigma = 2.0;
    const SwapMask fast = blur_mask(step, sigma);

    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k1(static_cast<std::size_t>(2 * radius + 1));
    double ks = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k1[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        ks += k1[static_cast<std::size_t>(i + radius)];
    }
    for (auto& v : k1) v /= ks;
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            double s = 0.0;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || xx >= 24 || yy < 0 || yy >= 24) continue;
                    s += k1[static_cast<std::size_t>(dx + radius)] *
                         k1[static_cast<std::size_t>(dy + radius)] * step.at(xx, yy);
                }
            CHECK(std::abs(fast.at(x, y) - s) < 1e-6);
        }
}

TEST_CASE("color correction: identical images are untouched") {
    Rng rng(51);
    const Image8 img = random_image(rng, 32, 32);
    SwapMask mask(32, 32, 1.0);
    const Image8 out = color_correct(img, img, mask, 5);
    CHECK(out.pixels == img.pixels);
}

TEST_CASE("color correction maps constant source mean to constant target mean") {
    Image8 src(32, 32, 100), tgt(32, 32, 50);
    SwapMask mask(32, 32);
    for (int y = 8; y < 24; ++y)
        for (int x = 8; x < 24; ++x) mask.at(x, y) = 1.0;
    const Image8 out = color_correct(src, tgt, mask, 5);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int ch = 0; ch < 3; ++ch)
                CHECK(out.at(x, y, ch) == (mask.at(x, y) > 0 ? 50 : 100));
}

TEST_CASE("color correction equals the sliding-window oracle at spot pixels") {
    Rng rng(61);
    const Image8 src = random_image(rng, 40, 40);
    const Image8 tgt = random_image(rng, 40, 40);
    SwapMask mask(40, 40, 1.0);
    const int radius = 7;
    const Image8 out = color_correct(src, tgt, mask, radius);
    for (int probe = 0; probe < 50; ++probe) {
        const int x = static_cast<int>(rng.uniform_int(40));
        const int y = static_cast<int>(rng.uniform_int(40));
        for (int ch = 0; ch < 3; ++ch) {
            long ssum = 0, tsum = 0;
            int count = 0;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || xx >= 40 || yy < 0 || yy >= 40) continue;
                    ssum += src.at(xx, yy, ch);
                    tsum += tgt.at(xx, yy, ch);
                    ++count;
                }
            const double expect = src.at(x, y, ch) +
                                  static_cast<double>(tsum) / count -
                                  static_cast<double>(ssum) / count;
            const long clamped = std::clamp(std::lround(expect), 0l, 255l);
            CHECK(static_cast<long>(out.at(x, y, ch)) == clamped);
        }
    }
}

TEST_CASE("blend_swap endpoints and midpoint") {
    Rng rng(71);
    const Image8 src = random_image(rng, 16, 16);
    const Image8 tgt = random_image(rng, 16, 16);
    CHECK(blend_swap(src, tgt, SwapMask(16, 16, 0.0)).pixels == tgt.pixels);
    CHECK(blend_swap(src, tgt, SwapMask(16, 16, 1.0)).pixels == src.pixels);

    const Image8 a(16, 16, 200), b(16, 16, 100);
    const Image8 mid = blend_swap(a, b, SwapMask(16, 16, 0.5));
    for (auto px : mid.pixels) CHECK(static_cast<int>(px) == 150);

    CHECK_THROWS_AS(blend_swap(src, tgt, SwapMask(8, 8, 0.5)), DimensionError);
}

TEST_CASE("blend identity: blend(x, x, m) == x within rounding") {
    Rng rng(81);
    const Image8 img = random_image(rng, 24, 24);
    SwapMask mask(24, 24);
    for (auto& v : mask.values) v = rng.uniform();
    const Image8 out = blend_swap(img, img, mask);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(std::abs(static_cast<int>(out.pixels[i]) - static_cast<int>(img.pixels[i])) <= 1);
}

TEST_CASE("generate_training_pairs emits linked mirrored fakes") {
    const fs::path real_dir = fs::temp_directory_path() / "ict_forge_real";
    const fs::path fake_dir = fs::temp_directory_path() / "ict_forge_fake";
    fs::remove_all(real_dir);
    fs::remove_all(fake_dir);
    const DatasetManifest real = generate_dataset(6, 4, 5, real_dir.string(), 56, 56);

    const ForgeManifest forge =
        generate_training_pairs(real.root, real.meta_path, 50, 9, fake_dir.string());
    CHECK(forge.total_images == 100);

    const auto rows = load_fake_meta(forge.meta_path);
    REQUIRE(rows.size() == 100);
    std::map<std::string, FakeMetaRow> by_path;
    for (const auto& r : rows) by_path[r.path] = r;
    for (const auto& r : rows) {
        CHECK(r.inner_identity != r.outer_identity);
        REQUIRE(by_path.count(r.partner_path) == 1);
        const auto& partner = by_path[r.partner_path];
        CHECK(partner.partner_path == r.path);  // bidirectional link
        CHECK(partner.inner_identity == r.outer_identity);
        CHECK(partner.outer_identity == r.inner_identity);
    }

    // outside the mask support the fake equals one of the outer identity's
    // real images, pixel for pixel
    const auto real_rows = load_real_meta(real.meta_path);
    for (int probe = 0; probe < 6; ++probe) {
        const auto& r = rows[static_cast<std::size_t>(probe * 15)];
        const Image8 fake = read_ppm((fake_dir / r.path).string());
        const MaskImage mask = read_pgm((fake_dir / r.mask_path).string());
        bool matched_any = false;
        for (const auto& rr : real_rows) {
            if (rr.identity != r.outer_identity) continue;
            const Image8 outer = read_ppm((real_dir / rr.path).string());
            bool all_eq = true;
            for (int y = 0; y < fake.height && all_eq; ++y)
                for (int x = 0; x < fake.width && all_eq; ++x) {
                    if (mask.at(x, y) != 0.0) continue;
                    for (int ch = 0; ch < 3; ++ch)
                        if (fake.at(x, y, ch) != outer.at(x, y, ch)) all_eq = false;
                }
            matched_any = matched_any || all_eq;
        }
        CHECK(matched_any);
    }

    // determinism: regenerate and compare metadata byte-for-byte
    const fs::path fake_dir2 = fs::temp_directory_path() / "ict_forge_fake2";
    fs::remove_all(fake_dir2);
    const ForgeManifest forge2 =
        generate_training_pairs(real.root, real.meta_path, 50, 9, fake_dir2.string());
    const auto rows2 = load_fake_meta(forge2.meta_path);
    REQUIRE(rows2.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].path == rows2[i].path);
        CHECK(rows[i].inner_identity == rows2[i].inner_identity);
    }
    const Image8 f1 = read_ppm((fake_dir / "fake/0.ppm").string());
    const Image8 f2 = read_ppm((fake_dir2 / "fake/0.ppm").string());
    CHECK(f1.pixels == f2.pixels);

    fs::remove_all(real_dir);
    fs::remove_all(fake_dir);
    fs::remove_all(fake_dir2);
}

TEST_CASE("forging fails below two identities") {
    const fs::path real_dir = fs::temp_directory_path() / "ict_forge_single";
    fs::remove_all(real_dir);
    const DatasetManifest real = generate_dataset(1, 4, 5, real_dir.string(), 56, 56);
    CHECK_THROWS_AS(generate_training_pairs(real.root, real.meta_path, 3, 1,
                                            (real_dir / "fake").string()),
                    ContractError);
    fs::remove_all(real_dir);
}

TEST_CASE("degradation parameter tables match the documented severities") {
    CHECK(jpeg_quality_for_severity(1) == 90);
    CHECK(jpeg_quality_for_severity(2) == 70);
    CHECK(jpeg_quality_for_severity(3) == 50);
    CHECK(jpeg_quality_for_severity(4) == 30);
    CHECK(jpeg_quality_for_severity(5) == 20);
    CHECK(pixelation_block_for_severity(1) == 2);
    CHECK(pixelation_block_for_severity(5) == 10);
    CHECK(noise_sigma_for_severity(3) == 15.0);
    CHECK(blur_sigma_for_severity(1) == 0.5);
    CHECK_THROWS_AS(noise_sigma_for_severity(0), ContractError);
    CHECK_THROWS_AS(noise_sigma_for_severity(6), ContractError);
}

TEST_CASE("pixelation: identity at block 1, hand oracle at block 2") {
    Rng rng(91);
    const Image8 img = random_image(rng, 4, 4);
    CHECK(pixelate(img, 1).pixels == img.pixels);

    const Image8 out = pixelate(img, 2);
    for (int by = 0; by < 4; by += 2)
        for (int bx = 0; bx < 4; bx += 2)
            for (int ch = 0; ch < 3; ++ch) {
                const long mean = std::lround(
                    (img.at(bx, by, ch) + img.at(bx + 1, by, ch) + img.at(bx, by + 1, ch) +
                     img.at(bx + 1, by + 1, ch)) /
                    4.0);
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx)
                        CHECK(static_cast<long>(out.at(bx + dx, by + dy, ch)) == mean);
            }
}

TEST_CASE("constant images are fixed points of blur and pixelation") {
    const Image8 img(33, 17, 77);  // odd sizes exercise edge handling
    CHECK(gaussian_blur_image(img, 2.5).pixels == img.pixels);
    CHECK(pixelate(img, 4).pixels == img.pixels);
}

TEST_CASE("jpeg round-trip at quality 100 is a near-identity") {
    const FaceImage f = synthetic_face(0, 101, 56);
    const Image8 out = jpeg_roundtrip(f.image, 100);
    int maxerr = 0;
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        maxerr = std::max(maxerr, std::abs(static_cast<int>(out.pixels[i]) -
                                           static_cast<int>(f.image.pixels[i])));
    CHECK(maxerr <= 2);
}

TEST_CASE("degrade keeps dimensions, landmarks and label") {
    const FaceImage f = synthetic_face(3, 111, 56);
    for (auto kind : {DegradationKind::gaussian_noise, DegradationKind::gaussian_blur,
                      DegradationKind::pixelation, DegradationKind::jpeg_quant}) {
        for (int sev = 1; sev <= 5; ++sev) {
            const FaceImage d = degrade(f, {kind, sev}, 5);
            CHECK(d.image.width == f.image.width);
            CHECK(d.image.height == f.image.height);
            CHECK(d.identity == f.identity);
            REQUIRE(d.landmarks.size() == f.landmarks.size());
            CHECK(d.landmarks[0].x == f.landmarks[0].x);
        }
    }
    // noise is seed-deterministic
    const FaceImage n1 = degrade(f, {DegradationKind::gaussian_noise, 3}, 42);
    const FaceImage n2 = degrade(f, {DegradationKind::gaussian_noise, 3}, 42);
    CHECK(n1.image.pixels == n2.image.pixels);
}

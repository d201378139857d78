#include "ict/swap_forge.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "ict/errors.hpp"
#include "ict/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace ict {

int find_pose_match(const FaceImage& query, const std::vector<FaceImage>& candidates) {
    if (candidates.empty()) throw ContractError("find_pose_match: no candidates");
    const std::size_t k = query.landmarks.size();
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const FaceImage& c = candidates[i];
        if (c.identity == query.identity) continue;
        if (c.landmarks.size() != k)
            throw ContractError("find_pose_match: landmark count mismatch at candidate " +
                                std::to_string(i));
        double d = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double dx = c.landmarks[p].x - query.landmarks[p].x;
            const double dy = c.landmarks[p].y - query.landmarks[p].y;
            d += dx * dx + dy * dy;
        }
        d /= static_cast<double>(k);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    if (best < 0) throw NoMatchError("find_pose_match: every candidate shares the query identity");
    return best;
}

SwapMask build_hull_mask(const LandmarkSet& landmarks, int width, int height) {
    const auto hull = convex_hull(landmarks);  // throws on degenerate input
    SwapMask mask(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (point_in_convex_polygon(hull, {x + 0.5, y + 0.5})) mask.at(x, y) = 1.0;
    return mask;
}

MaskImage blur_mask(const MaskImage& mask, double sigma) {
    if (sigma < 0.05) return mask;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        ksum += kernel[static_cast<std::size_t>(i + radius)];
    }
    for (auto& kv : kernel) kv /= ksum;

    const int w = mask.width, h = mask.height;
    MaskImage tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = x + i;
                if (xx >= 0 && xx < w) s += kernel[static_cast<std::size_t>(i + radius)] * mask.at(xx, y);
            }
            tmp.at(x, y) = s;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = y + i;
                if (yy >= 0 && yy < h) s += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(x, yy);
            }
            out.at(x, y) = s;
        }
    return out;
}

namespace {

double sample_bilinear(const MaskImage& m, double x, double y) {
    // sample grid anchored at pixel centers; zero outside
    const double fx = x - 0.5, fy = y - 0.5;
    const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
    const double ax = fx - x0, ay = fy - y0;
    double v = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
            const int xx = x0 + dx, yy = y0 + dy;
            if (xx < 0 || xx >= m.width || yy < 0 || yy >= m.height) continue;
            const double wgt = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
            v += wgt * m.at(xx, yy);
        }
    return v;
}

// Piecewise-affine displacement: each grid cell is split into two triangles
// and node offsets are interpolated barycentrically.
Vec2 grid_displacement(const std::vector<Vec2>& offsets, int grid_n, double w, double h,
                       Vec2 p) {
    const int cells = grid_n - 1;
    double gx = p.x / w * cells, gy = p.y / h * cells;
    gx = std::clamp(gx, 0.0, static_cast<double>(cells) - 1e-9);
    gy = std::clamp(gy, 0.0, static_cast<double>(cells) - 1e-9);
    const int cx = static_cast<int>(gx), cy = static_cast<int>(gy);
    const double s = gx - cx, t = gy - cy;
    auto node = [&](int ix, int iy) -> const Vec2& {
        return offsets[static_cast<std::size_t>(iy) * grid_n + ix];
    };
    const Vec2& o00 = node(cx, cy);
    const Vec2& o10 = node(cx + 1, cy);
    const Vec2& o01 = node(cx, cy + 1);
    const Vec2& o11 = node(cx + 1, cy + 1);
    if (s + t <= 1.0) {
        return o00 + s * (o10 - o00) + t * (o01 - o00);
    }
    return o11 + (1.0 - s) * (o01 - o11) + (1.0 - t) * (o10 - o11);
}

}  // namespace

SwapMask deform_mask_with(const SwapMask& mask, const std::vector<Vec2>& grid_offsets,
                          double blur_sigma) {
    if (grid_offsets.size() != static_cast<std::size_t>(kDeformGridN * kDeformGridN))
        throw ContractError("deform_mask_with: expected " +
                            std::to_string(kDeformGridN * kDeformGridN) + " grid offsets");
    const int w = mask.width, h = mask.height;
    SwapMask warped(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Vec2 p{x + 0.5, y + 0.5};
            const Vec2 d = grid_displacement(grid_offsets, kDeformGridN, w, h, p);
            warped.at(x, y) = sample_bilinear(mask, p.x + d.x, p.y + d.y);
        }
    return blur_mask(warped, blur_sigma);
}

SwapMask deform_mask(const SwapMask& mask, std::uint64_t rng_seed) {
    // bounding box of the support drives the offset magnitude
    int minx = mask.width, miny = mask.height, maxx = -1, maxy = -1;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y) > 0.0) {
                minx = std::min(minx, x);
                miny = std::min(miny, y);
                maxx = std::max(maxx, x);
                maxy = std::max(maxy, y);
            }
    double diag = 0.0;
    if (maxx >= minx) {
        const double bw = maxx - minx + 1, bh = maxy - miny + 1;
        diag = std::sqrt(bw * bw + bh * bh);
    }
    const double amp = 0.08 * diag;

    Rng rng(rng_seed);
    std::vector<Vec2> offsets(static_cast<std::size_t>(kDeformGridN * kDeformGridN));
    for (auto& o : offsets) {
        o.x = rng.uniform(-amp, amp);
        o.y = rng.uniform(-amp, amp);
    }
    const double sigma = rng.uniform(3.0, 9.0);
    return deform_mask_with(mask, offsets, sigma);
}

int default_box_radius(int width, int height) {
    return std::max(1, static_cast<int>(std::lround(15.0 * std::min(width, height) / 112.0)));
}

namespace {

// Summed-area table; sat[(y+1)*(w+1)+(x+1)] = sum of channel over [0..x, 0..y].
std::vector<std::int64_t> build_sat(const Image8& img, int ch) {
    const int w = img.width, h = img.height;
    std::vector<std::int64_t> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    for (int y = 0; y < h; ++y) {
        std::int64_t row = 0;
        for (int x = 0; x < w; ++x) {
            row += img.at(x, y, ch);
            sat[static_cast<std::size_t>(y + 1) * (w + 1) + (x + 1)] =
                sat[static_cast<std::size_t>(y) * (w + 1) + (x + 1)] + row;
        }
    }
    return sat;
}

double box_mean(const std::vector<std::int64_t>& sat, int w, int h, int x, int y, int radius) {
    const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
    const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
    const std::int64_t sum = sat[static_cast<std::size_t>(y1 + 1) * (w + 1) + (x1 + 1)] -
                             sat[static_cast<std::size_t>(y0) * (w + 1) + (x1 + 1)] -
                             sat[static_cast<std::size_t>(y1 + 1) * (w + 1) + x0] +
                             sat[static_cast<std::size_t>(y0) * (w + 1) + x0];
    const int count = (x1 - x0 + 1) * (y1 - y0 + 1);
    return static_cast<double>(sum) / count;
}

}  // namespace

Image8 color_correct(const Image8& source, const Image8& target, const SwapMask& mask,
                     int radius) {
    if (!source.same_size(target) || source.width != mask.width || source.height != mask.height)
        throw DimensionError("color_correct: image/mask sizes differ");
    Image8 out = source;
    const int w = source.width, h = source.height;
    for (int ch = 0; ch < 3; ++ch) {
        const auto sat_s = build_sat(source, ch);
        const auto sat_t = build_sat(target, ch);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (mask.at(x, y) <= 0.0) continue;
                const double mean_s = box_mean(sat_s, w, h, x, y, radius);
                const double mean_t = box_mean(sat_t, w, h, x, y, radius);
                const double v = source.at(x, y, ch) + mean_t - mean_s;
                out.at(x, y, ch) =
                    static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
            }
    }
    return out;
}

Image8 blend_swap(const Image8& source, const Image8& target, const SwapMask& mask) {
    if (!source.same_size(target) || source.width != mask.width || source.height != mask.height)
        throw DimensionError("blend_swap: image/mask sizes differ");
    Image8 out(source.width, source.height);
    for (int y = 0; y < source.height; ++y)
        for (int x = 0; x < source.width; ++x) {
            const double m = mask.at(x, y);
            for (int ch = 0; ch < 3; ++ch) {
                const double v = m * source.at(x, y, ch) + (1.0 - m) * target.at(x, y, ch);
                out.at(x, y, ch) =
                    static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
            }
        }
    return out;
}

ForgeManifest generate_training_pairs(const std::string& real_root,
                                      const std::string& real_meta_path, int n_pairs,
                                      std::uint64_t rng_seed, const std::string& out_dir,
                                      const ForgeOptions& options) {
    const auto rows = load_real_meta(real_meta_path);
    std::set<int> identities;
    for (const auto& r : rows) identities.insert(r.identity);
    if (identities.size() < 2)
        throw ContractError("generate_training_pairs: need at least 2 identities, have " +
                            std::to_string(identities.size()));

    std::vector<FaceImage> images;
    images.reserve(rows.size());
    for (const auto& r : rows) images.push_back(load_face(real_root, r));

    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "fake", ec);
    fs::create_directories(fs::path(out_dir) / "masks", ec);
    const std::string meta_path = (fs::path(out_dir) / "fake_meta.jsonl").string();
    std::ofstream meta(meta_path);
    if (!meta) throw IoError("cannot open for writing: " + meta_path);

    const int radius = default_box_radius(images[0].image.width, images[0].image.height);

    auto forge_one = [&](const FaceImage& inner_src, const FaceImage& outer_src,
                         std::uint64_t seed) {
        SwapMask mask = build_hull_mask(outer_src.landmarks, outer_src.image.width,
                                        outer_src.image.height);
        if (options.deform) mask = deform_mask(mask, seed);
        Image8 src = options.color_correct
                         ? color_correct(inner_src.image, outer_src.image, mask, radius)
                         : inner_src.image;
        return std::pair<Image8, SwapMask>(blend_swap(src, outer_src.image, mask),
                                           std::move(mask));
    };

    int emitted = 0;
    for (int k = 0; k < n_pairs; ++k) {
        Rng rng(derive_seed(rng_seed, static_cast<std::uint64_t>(k), 0xf0));
        int qi = -1, mi = -1;
        for (int attempt = 0; attempt < 32 && mi < 0; ++attempt) {
            qi = static_cast<int>(rng.uniform_int(images.size()));
            // candidate pool: sampled without replacement, query excluded
            std::vector<int> pool_idx;
            pool_idx.reserve(images.size() - 1);
            for (int i = 0; i < static_cast<int>(images.size()); ++i)
                if (i != qi) pool_idx.push_back(i);
            rng.shuffle(pool_idx);
            const int pool = std::min<int>(options.candidate_pool,
                                           static_cast<int>(pool_idx.size()));
            std::vector<FaceImage> candidates;
            candidates.reserve(static_cast<std::size_t>(pool));
            for (int i = 0; i < pool; ++i)
                candidates.push_back(images[static_cast<std::size_t>(pool_idx[static_cast<std::size_t>(i)])]);
            try {
                mi = pool_idx[static_cast<std::size_t>(find_pose_match(images[static_cast<std::size_t>(qi)], candidates))];
            } catch (const NoMatchError&) {
                mi = -1;  // all-pool identity collision; redraw
            }
        }
        if (mi < 0)
            throw NoMatchError("generate_training_pairs: could not find a cross-identity match");

        const FaceImage& a = images[static_cast<std::size_t>(qi)];
        const FaceImage& b = images[static_cast<std::size_t>(mi)];
        const int n_ab = 2 * k, n_ba = 2 * k + 1;

        auto [img_ab, mask_ab] = forge_one(a, b, derive_seed(rng_seed, k, 0xab));
        auto [img_ba, mask_ba] = forge_one(b, a, derive_seed(rng_seed, k, 0xba));

        const std::string p_ab = "fake/" + std::to_string(n_ab) + ".ppm";
        const std::string p_ba = "fake/" + std::to_string(n_ba) + ".ppm";
        const std::string m_ab = "masks/" + std::to_string(n_ab) + ".pgm";
        const std::string m_ba = "masks/" + std::to_string(n_ba) + ".pgm";
        write_ppm(img_ab, (fs::path(out_dir) / p_ab).string());
        write_ppm(img_ba, (fs::path(out_dir) / p_ba).string());
        write_pgm(mask_ab, (fs::path(out_dir) / m_ab).string());
        write_pgm(mask_ba, (fs::path(out_dir) / m_ba).string());

        meta << ordered_json{{"path", p_ab},
                             {"mask_path", m_ab},
                             {"inner_identity", a.identity},
                             {"outer_identity", b.identity},
                             {"partner_path", p_ba}}
                    .dump()
             << "\n";
        meta << ordered_json{{"path", p_ba},
                             {"mask_path", m_ba},
                             {"inner_identity", b.identity},
                             {"outer_identity", a.identity},
                             {"partner_path", p_ab}}
                    .dump()
             << "\n";
        emitted += 2;
    }
    meta.close();
    if (!meta) throw IoError("write failed: " + meta_path);

    ForgeManifest man;
    man.root = out_dir;
    man.meta_path = meta_path;
    man.n_pairs = n_pairs;
    man.total_images = emitted;
    return man;
}

std::vector<FakeMetaRow> load_fake_meta(const std::string& meta_path) {
    std::ifstream in(meta_path);
    if (!in) throw IoError("cannot open: " + meta_path);
    std::vector<FakeMetaRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        FakeMetaRow row;
        row.path = j.at("path").get<std::string>();
        row.mask_path = j.at("mask_path").get<std::string>();
        row.inner_identity = j.at("inner_identity").get<int>();
        row.outer_identity = j.at("outer_identity").get<int>();
        row.partner_path = j.at("partner_path").get<std::string>();
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace ict

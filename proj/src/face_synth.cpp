#include "ict/face_synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ict/errors.hpp"
#include "ict/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace ict {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Rgb {
    double r, g, b;
};

Rgb coeff_rgb(const IdentityParams& id, int base) {
    return {id.coeffs[base] * 255.0, id.coeffs[base + 1] * 255.0, id.coeffs[base + 2] * 255.0};
}

// Everything below works in canonical face units: offsets from the face
// center in multiples of u = min(width, height).
struct FaceGeometry {
    double rx, ry, pinch;
    double es, ey, esz;
    double nose_w, nose_top, nose_base;
    double mouth_w, mouth_y, mouth_bow, mouth_half;
    double brow_t;
    double hair_amp, hair_wave;

    explicit FaceGeometry(const IdentityParams& id) {
        const auto& c = id.coeffs;
        rx = c[0];
        ry = c[1];
        pinch = c[22];
        es = c[2];
        ey = c[19];
        esz = c[3];
        nose_w = c[7];
        nose_top = ey + 0.02;
        nose_base = nose_top + c[8];
        mouth_w = c[9];
        mouth_y = c[20];
        mouth_bow = 0.05 * c[10];
        mouth_half = c[23];
        brow_t = c[18];
        hair_amp = c[17];
        hair_wave = c[21];
    }

    // Horizontal oval half-width narrows toward the chin (t = y / ry in [-1,1]).
    double rx_at(double t) const { return t > 0.0 ? rx * (1.0 - pinch * t) : rx; }

    bool in_oval(Vec2 p) const {
        const double t = p.y / ry;
        if (t < -1.0 || t > 1.0) return false;
        const double r = rx_at(t);
        return (p.x / r) * (p.x / r) + t * t <= 1.0;
    }

    // Hair sits behind the head: an ellipse with a wavy outer boundary.
    bool in_hair(Vec2 p) const {
        const double hx = rx * 1.24, hy = ry * 1.18;
        const double cx = p.x / hx, cy = (p.y + 0.02) / hy;
        const double rho = std::sqrt(cx * cx + cy * cy);
        if (rho < 1e-12) return true;
        const double phi = std::atan2(cy, cx);
        return rho <= 1.0 + hair_amp * std::sin(hair_wave * phi);
    }

    double mouth_line(double x) const {
        const double s = 2.0 * x / mouth_w;
        return mouth_y + mouth_bow * (1.0 - s * s);
    }

    // Elliptical lip band tapering to the corners.
    bool in_mouth(Vec2 p) const {
        const double s = 2.0 * p.x / mouth_w;
        if (std::abs(s) > 1.0) return false;
        const double dy = (p.y - mouth_line(p.x)) / mouth_half;
        return s * s + dy * dy <= 1.0;
    }

    bool in_nose(Vec2 p) const {
        if (p.y < nose_top || p.y > nose_base) return false;
        const double f = (p.y - nose_top) / (nose_base - nose_top);
        return std::abs(p.x) <= f * nose_w / 2.0;
    }

    bool in_eye_sclera(Vec2 p) const {
        const double wx = 1.6 * esz, wy = esz;
        for (double sgn : {-1.0, 1.0}) {
            const double dx = (p.x - sgn * es) / wx, dy = (p.y - ey) / wy;
            if (dx * dx + dy * dy <= 1.0) return true;
        }
        return false;
    }

    bool in_iris(Vec2 p) const {
        const double r = 0.55 * esz;
        for (double sgn : {-1.0, 1.0}) {
            const double dx = p.x - sgn * es, dy = p.y - ey;
            if (dx * dx + dy * dy <= r * r) return true;
        }
        return false;
    }

    // Sheared ellipses, temple ends raised, so no edge is axis-aligned.
    bool in_brow(Vec2 p) const {
        const double by = ey - 2.2 * esz;
        constexpr double kTilt = 0.14;
        const double ax = 1.4 * esz, ay = brow_t / 2.0;
        for (double sgn : {-1.0, 1.0}) {
            const double dx = p.x - sgn * es;
            const double dy = p.y - by + sgn * kTilt * dx;
            if ((dx / ax) * (dx / ax) + (dy / ay) * (dy / ay) <= 1.0) return true;
        }
        return false;
    }
};

Rgb shade(const FaceGeometry& g, const IdentityParams& id, Vec2 p) {
    static constexpr Rgb kBackground{64.0, 72.0, 84.0};
    static constexpr Rgb kSclera{242.0, 240.0, 236.0};
    static constexpr Rgb kLips{158.0, 58.0, 64.0};
    const Rgb skin = coeff_rgb(id, 11);
    const Rgb hair = coeff_rgb(id, 14);
    const Rgb eye = coeff_rgb(id, 4);

    if (g.in_oval(p)) {
        if (g.in_iris(p)) return eye;
        if (g.in_eye_sclera(p)) return kSclera;
        if (g.in_brow(p)) return {hair.r * 0.7, hair.g * 0.7, hair.b * 0.7};
        if (g.in_mouth(p)) return kLips;
        if (g.in_nose(p)) return {skin.r * 0.82, skin.g * 0.82, skin.b * 0.82};
        return skin;
    }
    if (g.in_hair(p)) return hair;
    return kBackground;
}

}  // namespace

const std::array<std::array<double, 2>, IdentityParams::kCount>& IdentityParams::ranges() {
    static const std::array<std::array<double, 2>, kCount> r = {{
        {0.190, 0.235},   // 0 oval_rx
        {0.240, 0.290},   // 1 oval_ry
        {0.070, 0.100},   // 2 eye_spacing
        {0.020, 0.032},   // 3 eye_size
        {0.05, 0.95},     // 4 eye_r
        {0.05, 0.95},     // 5 eye_g
        {0.05, 0.95},     // 6 eye_b
        {0.040, 0.080},   // 7 nose_width
        {0.060, 0.100},   // 8 nose_length
        {0.100, 0.180},   // 9 mouth_width
        {-0.5, 0.5},      // 10 mouth_curve
        {0.25, 0.95},     // 11 skin_r
        {0.20, 0.85},     // 12 skin_g
        {0.15, 0.80},     // 13 skin_b
        {0.02, 0.95},     // 14 hair_r
        {0.02, 0.85},     // 15 hair_g
        {0.02, 0.90},     // 16 hair_b
        {0.00, 0.08},     // 17 hair_amp
        {0.008, 0.020},   // 18 brow_thick
        {-0.100, -0.050}, // 19 eye_y
        {0.120, 0.160},   // 20 mouth_y
        {4.0, 9.0},       // 21 hair_wave
        {0.00, 0.25},     // 22 jaw_pinch
        {0.008, 0.014},   // 23 mouth_thick
    }};
    return r;
}

bool IdentityParams::within_ranges() const {
    const auto& r = ranges();
    for (int i = 0; i < kCount; ++i) {
        if (coeffs[static_cast<std::size_t>(i)] < r[static_cast<std::size_t>(i)][0] ||
            coeffs[static_cast<std::size_t>(i)] > r[static_cast<std::size_t>(i)][1])
            return false;
    }
    return true;
}

IdentityParams sample_identity(std::uint64_t seed) {
    Rng rng(seed);
    IdentityParams id;
    const auto& r = IdentityParams::ranges();
    for (int i = 0; i < IdentityParams::kCount; ++i)
        id.coeffs[static_cast<std::size_t>(i)] =
            rng.uniform(r[static_cast<std::size_t>(i)][0], r[static_cast<std::size_t>(i)][1]);
    return id;
}

PoseParams sample_pose(std::uint64_t seed) {
    Rng rng(seed);
    PoseParams p;
    p.yaw = rng.uniform(-0.3, 0.3);
    p.rot_deg = rng.uniform(-10.0, 10.0);
    p.scale = rng.uniform(0.9, 1.1);
    p.gain = rng.uniform(0.8, 1.2);
    return p;
}

Affine2 pose_transform(const PoseParams& pose, int width, int height) {
    const double u = std::min(width, height);
    // canonical offsets -> shear -> rotate -> scale -> pixel units -> center
    Affine2 m = Affine2::shear_x(pose.yaw);
    m = Affine2::compose(m, Affine2::rotation_deg(pose.rot_deg));
    m = Affine2::compose(m, Affine2::scaling(pose.scale * u));
    m = Affine2::compose(m, Affine2::translation(width * 0.5, height * 0.5));
    return m;
}

LandmarkSet face_landmarks(const IdentityParams& id, const PoseParams& pose, int width,
                           int height) {
    const FaceGeometry g(id);
    std::vector<Vec2> canonical;
    canonical.reserve(kLandmarkCount);
    for (int k = 0; k < kOvalLandmarks; ++k) {
        const double t = 2.0 * kPi * k / kOvalLandmarks;
        const double sy = std::sin(t);
        canonical.push_back({g.rx_at(sy) * std::cos(t), g.ry * sy});
    }
    canonical.push_back({-g.es, g.ey});                      // eye centers
    canonical.push_back({+g.es, g.ey});
    canonical.push_back({-(g.es + 1.6 * g.esz), g.ey});      // outer corners
    canonical.push_back({+(g.es + 1.6 * g.esz), g.ey});
    canonical.push_back({0.0, g.nose_base});                 // nose tip
    canonical.push_back({-g.mouth_w / 2.0, g.mouth_line(-g.mouth_w / 2.0)});
    canonical.push_back({+g.mouth_w / 2.0, g.mouth_line(+g.mouth_w / 2.0)});
    canonical.push_back({0.0, g.mouth_line(0.0)});

    const Affine2 m = pose_transform(pose, width, height);
    LandmarkSet out;
    out.reserve(canonical.size());
    for (Vec2 p : canonical) out.push_back(m.apply(p));
    return out;
}

FaceImage render_face(const IdentityParams& id, const PoseParams& pose, int width, int height) {
    const FaceGeometry g(id);
    const Affine2 inv = pose_transform(pose, width, height).inverse();

    constexpr int kSamples = 4;  // 4x4 supersampling
    FaceImage face;
    face.image = Image8(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc[3] = {0.0, 0.0, 0.0};
            for (int sy = 0; sy < kSamples; ++sy) {
                for (int sx = 0; sx < kSamples; ++sx) {
                    const Vec2 q{x + (sx + 0.5) / kSamples, y + (sy + 0.5) / kSamples};
                    const Rgb c = shade(g, id, inv.apply(q));
                    acc[0] += c.r;
                    acc[1] += c.g;
                    acc[2] += c.b;
                }
            }
            for (int ch = 0; ch < 3; ++ch) {
                const double v = acc[ch] / (kSamples * kSamples);
                face.image.at(x, y, ch) =
                    static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
            }
        }
    }
    // lighting applied after quantization so a gained render is exactly the
    // clean render scaled and clamped
    if (pose.gain != 1.0) {
        for (auto& b : face.image.pixels)
            b = static_cast<std::uint8_t>(
                std::clamp(std::lround(b * pose.gain), 0l, 255l));
    }
    face.landmarks = face_landmarks(id, pose, width, height);
    return face;
}

namespace {

ordered_json pose_to_json(const PoseParams& p) {
    return ordered_json{{"yaw", p.yaw}, {"rot_deg", p.rot_deg}, {"scale", p.scale}, {"gain", p.gain}};
}

PoseParams pose_from_json(const nlohmann::json& j) {
    PoseParams p;
    p.yaw = j.at("yaw").get<double>();
    p.rot_deg = j.at("rot_deg").get<double>();
    p.scale = j.at("scale").get<double>();
    p.gain = j.at("gain").get<double>();
    return p;
}

ordered_json landmarks_to_json(const LandmarkSet& lm) {
    ordered_json arr = ordered_json::array();
    for (const Vec2& p : lm) arr.push_back(ordered_json::array({p.x, p.y}));
    return arr;
}

LandmarkSet landmarks_from_json(const nlohmann::json& j) {
    LandmarkSet lm;
    for (const auto& p : j) lm.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return lm;
}

}  // namespace

DatasetManifest generate_dataset(int n_identities, int images_per_identity,
                                 std::uint64_t rng_seed, const std::string& out_dir, int width,
                                 int height, int id_base) {
    if (n_identities <= 0 || images_per_identity <= 0)
        throw ContractError("generate_dataset: counts must be positive");
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "real", ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

    const std::string meta_path = (fs::path(out_dir) / "real_meta.jsonl").string();
    std::ofstream meta(meta_path);
    if (!meta) throw IoError("cannot open for writing: " + meta_path);

    for (int k = 0; k < n_identities; ++k) {
        const int label = id_base + k;
        const IdentityParams id = sample_identity(derive_seed(rng_seed, label, 0x1d));
        const fs::path dir = fs::path(out_dir) / "real" / std::to_string(label);
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
        for (int j = 0; j < images_per_identity; ++j) {
            const PoseParams pose = sample_pose(derive_seed(rng_seed, label, j, 0x90));
            FaceImage face = render_face(id, pose, width, height);
            face.identity = label;
            const std::string rel =
                "real/" + std::to_string(label) + "/" + std::to_string(j) + ".ppm";
            write_ppm(face.image, (fs::path(out_dir) / rel).string());
            ordered_json row{{"path", rel},
                             {"identity", label},
                             {"landmarks", landmarks_to_json(face.landmarks)},
                             {"pose", pose_to_json(pose)}};
            meta << row.dump() << "\n";
        }
    }
    meta.close();
    if (!meta) throw IoError("write failed: " + meta_path);

    DatasetManifest man;
    man.root = out_dir;
    man.meta_path = meta_path;
    man.n_identities = n_identities;
    man.images_per_identity = images_per_identity;
    man.total_images = n_identities * images_per_identity;
    return man;
}

std::vector<RealMetaRow> load_real_meta(const std::string& meta_path) {
    std::ifstream in(meta_path);
    if (!in) throw IoError("cannot open: " + meta_path);
    std::vector<RealMetaRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        RealMetaRow row;
        row.path = j.at("path").get<std::string>();
        row.identity = j.at("identity").get<int>();
        row.landmarks = landmarks_from_json(j.at("landmarks"));
        row.pose = pose_from_json(j.at("pose"));
        rows.push_back(std::move(row));
    }
    return rows;
}

FaceImage load_face(const std::string& root, const RealMetaRow& row) {
    FaceImage face;
    face.image = read_ppm((fs::path(root) / row.path).string());
    face.landmarks = row.landmarks;
    face.identity = row.identity;
    return face;
}

}  // namespace ict

#pragma once

#include <vector>

namespace ict {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

// 2x2 linear part + translation; y grows downward (pixel convention).
struct Affine2 {
    double m00 = 1.0, m01 = 0.0, m10 = 0.0, m11 = 1.0;
    double tx = 0.0, ty = 0.0;

    Vec2 apply(Vec2 p) const { return {m00 * p.x + m01 * p.y + tx, m10 * p.x + m11 * p.y + ty}; }
    Vec2 apply_linear(Vec2 p) const { return {m00 * p.x + m01 * p.y, m10 * p.x + m11 * p.y}; }
    Affine2 inverse() const;

    static Affine2 translation(double tx, double ty);
    static Affine2 rotation_deg(double degrees);
    static Affine2 shear_x(double k);  // x' = x + k*y
    static Affine2 scaling(double s);
    // a then b  (result.apply == b.apply(a.apply(p)))
    static Affine2 compose(const Affine2& a, const Affine2& b);
};

// Monotone-chain convex hull, counter-clockwise in a y-down frame. Throws
// DegenerateGeometryError when all points are collinear.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

// Inclusive test against a convex polygon in hull order.
bool point_in_convex_polygon(const std::vector<Vec2>& poly, Vec2 p);

double polygon_area(const std::vector<Vec2>& poly);

}  // namespace ict

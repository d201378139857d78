#include "ict/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "ict/errors.hpp"

namespace ict {

Affine2 Affine2::inverse() const {
    const double det = m00 * m11 - m01 * m10;
    if (std::abs(det) < 1e-12) throw DegenerateGeometryError("affine transform is singular");
    Affine2 r;
    r.m00 = m11 / det;
    r.m01 = -m01 / det;
    r.m10 = -m10 / det;
    r.m11 = m00 / det;
    r.tx = -(r.m00 * tx + r.m01 * ty);
    r.ty = -(r.m10 * tx + r.m11 * ty);
    return r;
}

Affine2 Affine2::translation(double tx, double ty) {
    Affine2 r;
    r.tx = tx;
    r.ty = ty;
    return r;
}

Affine2 Affine2::rotation_deg(double degrees) {
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    Affine2 r;
    r.m00 = std::cos(rad);
    r.m01 = -std::sin(rad);
    r.m10 = std::sin(rad);
    r.m11 = std::cos(rad);
    return r;
}

Affine2 Affine2::shear_x(double k) {
    Affine2 r;
    r.m01 = k;
    return r;
}

Affine2 Affine2::scaling(double s) {
    Affine2 r;
    r.m00 = s;
    r.m11 = s;
    return r;
}

Affine2 Affine2::compose(const Affine2& a, const Affine2& b) {
    Affine2 r;
    r.m00 = b.m00 * a.m00 + b.m01 * a.m10;
    r.m01 = b.m00 * a.m01 + b.m01 * a.m11;
    r.m10 = b.m10 * a.m00 + b.m11 * a.m10;
    r.m11 = b.m10 * a.m01 + b.m11 * a.m11;
    const Vec2 t = b.apply({a.tx, a.ty});
    r.tx = t.x;
    r.ty = t.y;
    return r;
}

namespace {
double cross(Vec2 o, Vec2 a, Vec2 b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}
}  // namespace

std::vector<Vec2> convex_hull(std::vector<Vec2> points) {
    if (points.size() < 3) throw DegenerateGeometryError("convex hull needs at least 3 points");
    std::sort(points.begin(), points.end(), [](Vec2 a, Vec2 b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    const std::size_t n = points.size();
    std::vector<Vec2> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {  // lower
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
        while (k >= t && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    hull.resize(k - 1);
    if (hull.size() < 3 || std::abs(polygon_area(hull)) < 1e-9)
        throw DegenerateGeometryError("points are collinear; hull has no area");
    return hull;
}

bool point_in_convex_polygon(const std::vector<Vec2>& poly, Vec2 p) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (cross(poly[i], poly[(i + 1) % n], p) < 0) return false;
    }
    return true;
}

double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

}  // namespace ict

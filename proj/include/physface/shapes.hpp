#pragma once

// Primitive watertight meshes: axis box and subdivided icosphere. The
// icosphere vertices lie exactly on the unit sphere, so scaling by semi-axes
// yields points exactly on the target ellipsoid.

#include "physface/trimesh.hpp"

#include <map>

namespace physface {

inline TriMesh make_box(const Vec3& lo, const Vec3& hi) {
    TriMesh m;
    for (int c = 0; c < 8; ++c)
        m.vertices.push_back(Vec3((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(),
                                  (c & 4) ? hi.z() : lo.z()));
    // 12 triangles, outward orientation
    const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                             {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
    for (const auto& q : quads) {
        m.triangles.push_back({q[0], q[1], q[2]});
        m.triangles.push_back({q[0], q[2], q[3]});
    }
    m.confidence.assign(8, 1.0);
    return m;
}

inline TriMesh make_icosphere(int subdivisions) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& v : verts) v.normalize();
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
        {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
        {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
        {8, 6, 7},  {9, 8, 1}};

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int i, int j) {
            auto key = std::minmax(i, j);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const int id = int(verts.size());
            verts.push_back((verts[i] + verts[j]).normalized());
            midpoint[key] = id;
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
            next.push_back({f[0], a, c});
            next.push_back({f[1], b, a});
            next.push_back({f[2], c, b});
            next.push_back({a, b, c});
        }
        faces = std::move(next);
    }

    TriMesh m;
    m.vertices = std::move(verts);
    m.triangles = std::move(faces);
    m.confidence.assign(m.vertices.size(), 1.0);
    return m;
}

/// Icosphere mapped onto an ellipsoid: x = center + semi .* unit_sphere.
inline TriMesh make_ellipsoid(const Vec3& center, const Vec3& semi, int subdivisions) {
    TriMesh m = make_icosphere(subdivisions);
    for (Vec3& v : m.vertices) v = center + semi.cwiseProduct(v);
    return m;
}

} // namespace physface

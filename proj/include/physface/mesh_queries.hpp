#pragma once

// Distance / containment / intersection queries over immutable TriMeshes.
// A uniform spatial grid accelerates closest-point and pair queries; the
// intersection predicates fall back to exact rational arithmetic when the
// double-precision determinant is below its error filter.

#include "physface/trimesh.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace physface {

/// Closest point on triangle (a,b,c) to p. Ericson, Real-Time Collision
/// Detection, 5.1.5.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                      const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }

    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

// Uniform grid binning triangles by overlapped cells.
class TriGrid {
  public:
    explicit TriGrid(const TriMesh& mesh) : mesh_(&mesh) {
        if (mesh.triangle_count() == 0) throw InvalidInputError("TriGrid: empty mesh");
        auto [lo, hi] = mesh.bounding_box();
        const Vec3 extent = (hi - lo).cwiseMax(1e-9);
        const double target = std::cbrt(extent.prod() / std::max(1, mesh.triangle_count()));
        cell_ = std::max(target, 1e-9);
        origin_ = lo - Vec3::Constant(0.5 * cell_);
        for (int a = 0; a < 3; ++a)
            dims_[a] = std::max(1, int(std::ceil(extent[a] / cell_)) + 2);
        cells_.resize(std::size_t(dims_[0]) * dims_[1] * dims_[2]);
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            Vec3 tlo = mesh.vertices[mesh.triangles[t][0]];
            Vec3 thi = tlo;
            for (int k = 1; k < 3; ++k) {
                tlo = tlo.cwiseMin(mesh.vertices[mesh.triangles[t][k]]);
                thi = thi.cwiseMax(mesh.vertices[mesh.triangles[t][k]]);
            }
            const auto clo = cell_of(tlo);
            const auto chi = cell_of(thi);
            for (int i = clo[0]; i <= chi[0]; ++i)
                for (int j = clo[1]; j <= chi[1]; ++j)
                    for (int k = clo[2]; k <= chi[2]; ++k) cells_[flat(i, j, k)].push_back(t);
        }
    }

    double cell_size() const { return cell_; }

    std::array<int, 3> cell_of(const Vec3& p) const {
        std::array<int, 3> c;
        for (int a = 0; a < 3; ++a) {
            c[a] = int(std::floor((p[a] - origin_[a]) / cell_));
            c[a] = std::clamp(c[a], 0, dims_[a] - 1);
        }
        return c;
    }

    /// Visit triangles in cells overlapping [lo,hi], deduplicated.
    template <typename F>
    void for_each_in_box(const Vec3& lo, const Vec3& hi, F&& f) const {
        const auto clo = cell_of(lo);
        const auto chi = cell_of(hi);
        thread_local std::vector<int> stamps;
        thread_local int stamp = 0;
        if (int(stamps.size()) < mesh_->triangle_count())
            stamps.assign(mesh_->triangle_count(), 0);
        ++stamp;
        for (int i = clo[0]; i <= chi[0]; ++i)
            for (int j = clo[1]; j <= chi[1]; ++j)
                for (int k = clo[2]; k <= chi[2]; ++k)
                    for (int t : cells_[flat(i, j, k)]) {
                        if (stamps[t] == stamp) continue;
                        stamps[t] = stamp;
                        f(t);
                    }
    }

    /// Exact nearest point over all triangles via expanding ring search.
    std::pair<double, Vec3> closest(const Vec3& p) const {
        const auto c = cell_of(p);
        double best = std::numeric_limits<double>::max();
        Vec3 best_pt = Vec3::Zero();
        thread_local std::vector<int> stamps;
        thread_local int stamp = 0;
        if (int(stamps.size()) < mesh_->triangle_count())
            stamps.assign(mesh_->triangle_count(), 0);
        ++stamp;
        const int max_ring = dims_[0] + dims_[1] + dims_[2];
        for (int r = 0; r <= max_ring; ++r) {
            // cells in earlier rings are all closer than (r-1)*cell_
            if (best < double(r - 1) * cell_) break;
            bool any = false;
            for (int i = std::max(0, c[0] - r); i <= std::min(dims_[0] - 1, c[0] + r); ++i)
                for (int j = std::max(0, c[1] - r); j <= std::min(dims_[1] - 1, c[1] + r); ++j)
                    for (int k = std::max(0, c[2] - r); k <= std::min(dims_[2] - 1, c[2] + r);
                         ++k) {
                        const int ring = std::max({std::abs(i - c[0]), std::abs(j - c[1]),
                                                   std::abs(k - c[2])});
                        if (ring != r) continue;
                        any = true;
                        for (int t : cells_[flat(i, j, k)]) {
                            if (stamps[t] == stamp) continue;
                            stamps[t] = stamp;
                            const auto& tri = mesh_->triangles[t];
                            const Vec3 q = closest_point_on_triangle(
                                p, mesh_->vertices[tri[0]], mesh_->vertices[tri[1]],
                                mesh_->vertices[tri[2]]);
                            const double d = (p - q).norm();
                            if (d < best) {
                                best = d;
                                best_pt = q;
                            }
                        }
                    }
            if (!any && best < std::numeric_limits<double>::max() &&
                r > std::max({dims_[0], dims_[1], dims_[2]}))
                break;
        }
        return {best, best_pt};
    }

  private:
    std::size_t flat(int i, int j, int k) const {
        return (std::size_t(k) * dims_[1] + j) * dims_[0] + i;
    }

    const TriMesh* mesh_;
    Vec3 origin_;
    double cell_;
    std::array<int, 3> dims_;
    std::vector<std::vector<int>> cells_;
};

/// Exact minimum distance from p to the mesh surface, with the closest point.
inline std::pair<double, Vec3> point_to_mesh_distance(const Vec3& p, const TriMesh& mesh,
                                                      const TriGrid* grid = nullptr) {
    if (mesh.triangle_count() == 0)
        throw InvalidInputError("point_to_mesh_distance: empty mesh");
    if (grid) return grid->closest(p);
    double best = std::numeric_limits<double>::max();
    Vec3 best_pt = Vec3::Zero();
    for (const auto& tri : mesh.triangles) {
        const Vec3 q = closest_point_on_triangle(p, mesh.vertices[tri[0]],
                                                 mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
        const double d = (p - q).norm();
        if (d < best) {
            best = d;
            best_pt = q;
        }
    }
    return {best, best_pt};
}

namespace detail {

using Rational = boost::multiprecision::cpp_rational;

inline int sign_of(const Rational& r) { return r.sign(); }

inline int orient3d_exact(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const Rational ax(a.x()), ay(a.y()), az(a.z());
    const Rational ux = Rational(b.x()) - ax, uy = Rational(b.y()) - ay, uz = Rational(b.z()) - az;
    const Rational vx = Rational(c.x()) - ax, vy = Rational(c.y()) - ay, vz = Rational(c.z()) - az;
    const Rational wx = Rational(d.x()) - ax, wy = Rational(d.y()) - ay, wz = Rational(d.z()) - az;
    const Rational det = ux * (vy * wz - vz * wy) - uy * (vx * wz - vz * wx) +
                         uz * (vx * wy - vy * wx);
    return sign_of(det);
}

/// Sign of det[b-a, c-a, d-a], exact. Double fast path with an error filter.
inline int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const Vec3 u = b - a, v = c - a, w = d - a;
    const double det = u.dot(v.cross(w));
    const Vec3 au = u.cwiseAbs(), av = v.cwiseAbs(), aw = w.cwiseAbs();
    const double mag = au.dot(Vec3(av.y() * aw.z() + av.z() * aw.y(),
                                   av.x() * aw.z() + av.z() * aw.x(),
                                   av.x() * aw.y() + av.y() * aw.x()));
    if (std::abs(det) > 1e-12 * mag) return det > 0 ? 1 : -1;
    return orient3d_exact(a, b, c, d);
}

/// Proper (transversal, interior) segment-triangle crossing. Touching,
/// coplanar, or degenerate contacts do not count.
inline bool proper_segment_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b,
                                    const Vec3& c) {
    const int o1 = orient3d(p, a, b, c);
    const int o2 = orient3d(q, a, b, c);
    if (o1 == 0 || o2 == 0 || o1 == o2) return false;
    const int s1 = orient3d(p, q, a, b);
    const int s2 = orient3d(p, q, b, c);
    const int s3 = orient3d(p, q, c, a);
    if (s1 == 0 || s2 == 0 || s3 == 0) return false;
    return s1 == s2 && s2 == s3;
}

inline std::vector<std::array<int, 2>> unique_edges(const TriMesh& mesh) {
    std::vector<std::array<int, 2>> edges;
    std::unordered_set<std::uint64_t> seen;
    edges.reserve(mesh.triangle_count() * 3 / 2);
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            int i = tri[k], j = tri[(k + 1) % 3];
            if (i > j) std::swap(i, j);
            const std::uint64_t key = (std::uint64_t(i) << 32) | std::uint64_t(j);
            if (seen.insert(key).second) edges.push_back({i, j});
        }
    }
    return edges;
}

inline int count_edge_tri_crossings(const TriMesh& edges_of, const TriMesh& tris_of) {
    if (tris_of.triangle_count() == 0 || edges_of.triangle_count() == 0) return 0;
    TriGrid grid(tris_of);
    int count = 0;
    for (const auto& e : unique_edges(edges_of)) {
        const Vec3& p = edges_of.vertices[e[0]];
        const Vec3& q = edges_of.vertices[e[1]];
        const Vec3 lo = p.cwiseMin(q), hi = p.cwiseMax(q);
        grid.for_each_in_box(lo, hi, [&](int t) {
            const auto& tri = tris_of.triangles[t];
            if (proper_segment_triangle(p, q, tris_of.vertices[tri[0]], tris_of.vertices[tri[1]],
                                        tris_of.vertices[tri[2]]))
                ++count;
        });
    }
    return count;
}

} // namespace detail

/// Count of proper edge-triangle crossing pairs, both directions:
/// (edge of A, triangle of B) plus (edge of B, triangle of A).
inline int edge_triangle_penetrations(const TriMesh& a, const TriMesh& b) {
    return detail::count_edge_tri_crossings(a, b) + detail::count_edge_tri_crossings(b, a);
}

/// Edge-manifold check: every undirected edge used exactly twice, once per
/// orientation. Throws naming the open edges otherwise.
inline void require_watertight(const TriMesh& mesh) {
    std::map<std::pair<int, int>, int> balance; // +1 forward, -1 backward
    std::map<std::pair<int, int>, int> uses;
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            int i = tri[k], j = tri[(k + 1) % 3];
            const int dir = i < j ? 1 : -1;
            if (i > j) std::swap(i, j);
            balance[{i, j}] += dir;
            uses[{i, j}] += 1;
        }
    }
    std::string bad;
    int nbad = 0;
    for (const auto& [edge, n] : uses) {
        if (n != 2 || balance[edge] != 0) {
            if (++nbad <= 8)
                bad += " (" + std::to_string(edge.first) + "," + std::to_string(edge.second) + ")";
        }
    }
    if (nbad > 0)
        throw TopologyError("mesh is not watertight; " + std::to_string(nbad) +
                            " open/non-manifold edges:" + bad);
}

/// Generalized winding number of the surface around p (1 inside, 0 outside
/// for watertight meshes). Van Oosterom-Strackee solid angles.
inline double winding_number(const Vec3& p, const TriMesh& mesh) {
    double total = 0.0;
    for (const auto& tri : mesh.triangles) {
        const Vec3 a = mesh.vertices[tri[0]] - p;
        const Vec3 b = mesh.vertices[tri[1]] - p;
        const Vec3 c = mesh.vertices[tri[2]] - p;
        const double la = a.norm(), lb = b.norm(), lc = c.norm();
        const double num = a.dot(b.cross(c));
        const double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
        total += 2.0 * std::atan2(num, den);
    }
    return total / (4.0 * M_PI);
}

/// Winding-number containment (>= 0.5 rule). Requires a watertight mesh;
/// pass validated = true to skip re-checking.
inline bool inside(const Vec3& p, const TriMesh& mesh, bool validated = false) {
    if (!validated) require_watertight(mesh);
    return winding_number(p, mesh) >= 0.5;
}

} // namespace physface

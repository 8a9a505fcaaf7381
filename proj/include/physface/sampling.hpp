#pragma once

// Deterministic surface sampling. Area-weighted by default; a vertex mode
// returns the mesh vertices themselves (surface losses are evaluated on
// vertices, sampling covers everything else).

#include "physface/trimesh.hpp"

#include <numeric>

namespace physface {

enum class SampleMode { AreaWeighted, Vertices };

struct SurfaceSampleSet {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;                 // unit
    std::vector<int> triangle;                 // provenance triangle index
    std::vector<Vec3> barycentric;             // provenance coords, sum 1
    std::uint64_t seed = 0;

    std::size_t size() const { return points.size(); }

    /// Per-sample confidence interpolated from the provenance triangle.
    double confidence(const TriMesh& mesh, std::size_t i) const {
        const auto& tri = mesh.triangles[triangle[i]];
        const Vec3& b = barycentric[i];
        auto conf = [&](int v) {
            return v < int(mesh.confidence.size()) ? mesh.confidence[v] : 1.0;
        };
        return b[0] * conf(tri[0]) + b[1] * conf(tri[1]) + b[2] * conf(tri[2]);
    }
};

inline SurfaceSampleSet sample_surface(const TriMesh& mesh, int n, std::uint64_t seed,
                                       SampleMode mode = SampleMode::AreaWeighted) {
    if (mesh.triangle_count() == 0) throw InvalidInputError("sample_surface: empty mesh");
    if (n < 1) throw InvalidInputError("sample_surface: n must be >= 1");

    SurfaceSampleSet out;
    out.seed = seed;

    if (mode == SampleMode::Vertices) {
        if (n != mesh.vertex_count())
            throw InvalidInputError("sample_surface: vertex mode requires n == vertex count");
        // provenance: first triangle referencing each vertex
        std::vector<int> first_tri(mesh.vertex_count(), -1);
        std::vector<int> corner(mesh.vertex_count(), 0);
        for (int t = 0; t < mesh.triangle_count(); ++t)
            for (int k = 0; k < 3; ++k)
                if (first_tri[mesh.triangles[t][k]] < 0) {
                    first_tri[mesh.triangles[t][k]] = t;
                    corner[mesh.triangles[t][k]] = k;
                }
        const auto vnormals = mesh.vertex_normals();
        for (int v = 0; v < mesh.vertex_count(); ++v) {
            if (first_tri[v] < 0)
                throw InvalidInputError("sample_surface: isolated vertex " + std::to_string(v));
            out.points.push_back(mesh.vertices[v]);
            out.normals.push_back(vnormals[v]);
            out.triangle.push_back(first_tri[v]);
            Vec3 bary = Vec3::Zero();
            bary[corner[v]] = 1.0;
            out.barycentric.push_back(bary);
        }
        return out;
    }

    std::vector<double> cdf(mesh.triangle_count());
    double acc = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        acc += mesh.triangle_area(t);
        cdf[t] = acc;
    }
    if (acc <= 0.0) throw InvalidInputError("sample_surface: zero total area");

    Rng rng(seed);
    out.points.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double r = rng.uniform() * acc;
        const int t = int(std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
        const int tt = std::min(t, mesh.triangle_count() - 1);
        // square-root warp gives uniform density in the triangle
        const double su = std::sqrt(rng.uniform());
        const double v = rng.uniform();
        const Vec3 bary(1.0 - su, su * (1.0 - v), su * v);
        const auto& tri = mesh.triangles[tt];
        out.points.push_back(bary[0] * mesh.vertices[tri[0]] + bary[1] * mesh.vertices[tri[1]] +
                             bary[2] * mesh.vertices[tri[2]]);
        out.normals.push_back(mesh.triangle_normal(tt).normalized());
        out.triangle.push_back(tt);
        out.barycentric.push_back(bary);
    }
    return out;
}

} // namespace physface

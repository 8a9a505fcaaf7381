#pragma once

// Triangle surface meshes and OBJ I/O. OBJ is the sole mesh format: ASCII
// v/f records, plus the vertex-color extension `v x y z c c c` storing a
// per-vertex confidence scalar (repeated three times).

#include "physface/types.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace physface {

struct TriMesh {
    std::vector<Vec3> vertices;                 // mm
    std::vector<std::array<int, 3>> triangles;  // vertex indices
    std::vector<double> confidence;             // per vertex, defaults to 1

    int vertex_count() const { return int(vertices.size()); }
    int triangle_count() const { return int(triangles.size()); }

    Vec3 triangle_normal(int t) const {
        const auto& tri = triangles[t];
        return (vertices[tri[1]] - vertices[tri[0]]).cross(vertices[tri[2]] - vertices[tri[0]]);
    }

    double triangle_area(int t) const { return 0.5 * triangle_normal(t).norm(); }

    double total_area() const {
        double a = 0;
        for (int t = 0; t < triangle_count(); ++t) a += triangle_area(t);
        return a;
    }

    std::pair<Vec3, Vec3> bounding_box() const {
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
        Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
        for (const Vec3& v : vertices) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
        return {lo, hi};
    }

    /// Area-weighted per-vertex normals, normalized.
    std::vector<Vec3> vertex_normals() const {
        std::vector<Vec3> n(vertices.size(), Vec3::Zero());
        for (int t = 0; t < triangle_count(); ++t) {
            const Vec3 fn = triangle_normal(t);
            for (int k = 0; k < 3; ++k) n[triangles[t][k]] += fn;
        }
        for (Vec3& v : n) {
            const double len = v.norm();
            if (len > 0) v /= len;
        }
        return n;
    }

    void validate() const {
        for (const auto& tri : triangles)
            for (int k = 0; k < 3; ++k)
                if (tri[k] < 0 || tri[k] >= vertex_count())
                    throw InvalidInputError("TriMesh: triangle index out of range");
    }
};

struct ObjLoadResult {
    TriMesh mesh;
    bool fan_triangulated = false;  // input had non-triangle faces
    int dropped_degenerate = 0;     // zero-area triangles removed on load
};

namespace detail {

inline double parse_double(const std::string& tok, int line_no) {
    double out = 0.0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e)
        throw IoError("OBJ parse error at line " + std::to_string(line_no) +
                      ": bad number '" + tok + "'");
    return out;
}

} // namespace detail

inline ObjLoadResult load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open OBJ file: " + path);

    ObjLoadResult result;
    TriMesh& mesh = result.mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            std::vector<std::string> toks;
            std::string t;
            while (ss >> t) toks.push_back(t);
            if (toks.size() != 3 && toks.size() != 6)
                throw IoError("OBJ parse error at line " + std::to_string(line_no) +
                              ": vertex needs 3 or 6 components");
            Vec3 v;
            for (int k = 0; k < 3; ++k) v[k] = detail::parse_double(toks[k], line_no);
            mesh.vertices.push_back(v);
            mesh.confidence.push_back(toks.size() == 6 ? detail::parse_double(toks[3], line_no)
                                                       : 1.0);
        } else if (tag == "f") {
            std::vector<int> ids;
            std::string t;
            while (ss >> t) {
                // strip /vt/vn suffixes
                const auto slash = t.find('/');
                if (slash != std::string::npos) t = t.substr(0, slash);
                const double raw = detail::parse_double(t, line_no);
                int id = int(raw);
                if (id < 0) id = int(mesh.vertices.size()) + id + 1; // negative = relative
                if (id < 1 || id > int(mesh.vertices.size()))
                    throw IoError("OBJ parse error at line " + std::to_string(line_no) +
                                  ": face index out of range");
                ids.push_back(id - 1);
            }
            if (ids.size() < 3)
                throw IoError("OBJ parse error at line " + std::to_string(line_no) +
                              ": face needs >= 3 vertices");
            if (ids.size() > 3) result.fan_triangulated = true;
            for (std::size_t k = 2; k < ids.size(); ++k)
                mesh.triangles.push_back({ids[0], int(ids[k - 1]), int(ids[k])});
        }
        // other records (vn, vt, o, g, s, mtllib, usemtl, ...) are ignored
    }

    // enforce the no-degenerate-triangle invariant
    std::vector<std::array<int, 3>> kept;
    kept.reserve(mesh.triangles.size());
    for (const auto& tri : mesh.triangles) {
        const Vec3 n = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                           .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] || n.norm() == 0.0) {
            ++result.dropped_degenerate;
            continue;
        }
        kept.push_back(tri);
    }
    mesh.triangles = std::move(kept);
    mesh.validate();
    return result;
}

inline void save_obj(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write OBJ file: " + path);
    char buf[160];
    bool has_conf = false;
    for (double c : mesh.confidence)
        if (c != 1.0) has_conf = true;
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        const Vec3& v = mesh.vertices[i];
        if (has_conf) {
            const double c = i < int(mesh.confidence.size()) ? mesh.confidence[i] : 1.0;
            std::snprintf(buf, sizeof buf, "v %.10g %.10g %.10g %.10g %.10g %.10g\n", v.x(),
                          v.y(), v.z(), c, c, c);
        } else {
            std::snprintf(buf, sizeof buf, "v %.10g %.10g %.10g\n", v.x(), v.y(), v.z());
        }
        out << buf;
    }
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    if (!out) throw IoError("failed while writing OBJ file: " + path);
}

} // namespace physface

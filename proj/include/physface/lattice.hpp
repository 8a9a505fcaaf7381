#pragma once

// Uniform hexahedral discretization of the soft-tissue volume, trilinear
// surface embeddings, per-element deformation gradients, and the versioned
// latv1 lattice file.

#include "physface/mesh_queries.hpp"
#include "physface/numerics.hpp"
#include "physface/phantom.hpp"

#include <fstream>
#include <queue>
#include <unordered_map>

namespace physface {

enum class SurfaceTag { Skin, Skull, Jaw };

inline const char* to_string(SurfaceTag t) {
    switch (t) {
        case SurfaceTag::Skin: return "skin";
        case SurfaceTag::Skull: return "skull";
        case SurfaceTag::Jaw: return "jaw";
    }
    return "?";
}

struct RefinementError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct HexLattice {
    Vec3 origin = Vec3::Zero();          // corner of cell (0,0,0)
    double h = 0.0;                      // cell size (mm)
    std::vector<std::array<int, 3>> cells;        // occupied cell indices, sorted
    std::vector<Vec3> nodes;                      // rest node coordinates u0
    std::vector<std::array<int, 8>> elements;     // 8 node ids per occupied cell

    int element_count() const { return int(elements.size()); }
    int node_count() const { return int(nodes.size()); }
    double element_volume() const { return h * h * h; }

    Vec3 cell_min(int e) const {
        return origin + h * Vec3(cells[e][0], cells[e][1], cells[e][2]);
    }
    Vec3 cell_center(int e) const { return cell_min(e) + Vec3::Constant(0.5 * h); }

    /// Containing cell of a point, or -1.
    int locate(const Vec3& p, double slack = 1e-9) const {
        auto it = index_.find(key_of(p));
        if (it != index_.end()) return it->second;
        // boundary points may sit on a face shared with an unoccupied cell
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const std::array<int, 3> base = cell_indices(p);
                    const std::array<int, 3> c = {base[0] + dx, base[1] + dy, base[2] + dz};
                    auto jt = index_.find(pack(c));
                    if (jt == index_.end()) continue;
                    const Vec3 local = (p - origin - h * Vec3(c[0], c[1], c[2])) / h;
                    if (local.minCoeff() >= -slack / h && local.maxCoeff() <= 1.0 + slack / h)
                        return jt->second;
                }
        return -1;
    }

    std::array<int, 3> cell_indices(const Vec3& p) const {
        return {int(std::floor((p.x() - origin.x()) / h)),
                int(std::floor((p.y() - origin.y()) / h)),
                int(std::floor((p.z() - origin.z()) / h))};
    }

    void build_index() {
        index_.clear();
        index_.reserve(cells.size() * 2);
        for (std::size_t e = 0; e < cells.size(); ++e) index_[pack(cells[e])] = int(e);
    }

    static std::int64_t pack(const std::array<int, 3>& c) {
        return ((std::int64_t(c[0]) + 0x100000) << 42) | ((std::int64_t(c[1]) + 0x100000) << 21) |
               (std::int64_t(c[2]) + 0x100000);
    }

  private:
    std::int64_t key_of(const Vec3& p) const { return pack(cell_indices(p)); }
    std::unordered_map<std::int64_t, int> index_;
};

struct Embedding {
    SurfaceTag tag = SurfaceTag::Skin;
    int rows = 0;
    struct Triplet {
        int row, col;
        double w;
    };
    std::vector<Triplet> weights; // <= 8 per row

    /// W * u.
    std::vector<Vec3> apply(std::span<const Vec3> nodes) const {
        std::vector<Vec3> out(rows, Vec3::Zero());
        for (const auto& t : weights) out[t.row] += t.w * nodes[t.col];
        return out;
    }

    /// W^T * g (scatter row gradients onto nodes).
    void accumulate_transpose(std::span<const Vec3> row_grads,
                              std::vector<Vec3>& node_grads) const {
        for (const auto& t : weights) node_grads[t.col] += t.w * row_grads[t.row];
    }

    std::vector<int> support_nodes() const {
        std::vector<int> ids;
        for (const auto& t : weights)
            if (t.w != 0.0) ids.push_back(t.col);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return ids;
    }
};

namespace lattice_detail {

struct InsideTester {
    const TriMesh* mesh;
    Vec3 lo, hi;
    explicit InsideTester(const TriMesh& m) : mesh(&m) {
        std::tie(lo, hi) = m.bounding_box();
    }
    bool operator()(const Vec3& p) const {
        if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) return false;
        return winding_number(p, *mesh) >= 0.5;
    }
};

} // namespace lattice_detail

inline HexLattice voxelize(const phantom::Anatomy& anatomy, double h) {
    if (h <= 0.0) throw InvalidInputError("voxelize: h must be positive");
    require_watertight(anatomy.skin);
    require_watertight(anatomy.skull);
    require_watertight(anatomy.jaw);

    // refuse cells coarser than the thinnest soft-tissue gap
    TriGrid skin_grid(anatomy.skin);
    double min_gap = std::numeric_limits<double>::max();
    for (const Vec3& v : anatomy.skull.vertices)
        min_gap = std::min(min_gap, point_to_mesh_distance(v, anatomy.skin, &skin_grid).first);
    for (const Vec3& v : anatomy.jaw.vertices)
        min_gap = std::min(min_gap, point_to_mesh_distance(v, anatomy.skin, &skin_grid).first);
    if (h > min_gap)
        throw RefinementError("voxelize: h = " + std::to_string(h) +
                              " mm exceeds the minimum soft-tissue gap " +
                              std::to_string(min_gap) + " mm; choose a smaller h");

    auto [lo, hi] = anatomy.skin.bounding_box();
    HexLattice lat;
    lat.h = h;
    lat.origin = lo - Vec3::Constant(1.5 * h);
    const std::array<int, 3> dims = {int(std::ceil((hi.x() - lat.origin.x()) / h)) + 2,
                                     int(std::ceil((hi.y() - lat.origin.y()) / h)) + 2,
                                     int(std::ceil((hi.z() - lat.origin.z()) / h)) + 2};

    lattice_detail::InsideTester in_skin(anatomy.skin);
    lattice_detail::InsideTester in_skull(anatomy.skull);
    lattice_detail::InsideTester in_jaw(anatomy.jaw);

    std::unordered_map<std::int64_t, char> occupied;
    for (int i = 0; i < dims[0]; ++i)
        for (int j = 0; j < dims[1]; ++j)
            for (int k = 0; k < dims[2]; ++k) {
                const Vec3 center = lat.origin + h * (Vec3(i, j, k) + Vec3::Constant(0.5));
                if (!in_skin(center)) continue;
                if (in_skull(center) || in_jaw(center)) continue;
                occupied[HexLattice::pack({i, j, k})] = 1;
            }
    auto add_vertex_cells = [&](const TriMesh& m) {
        for (const Vec3& v : m.vertices) {
            const std::array<int, 3> c = {int(std::floor((v.x() - lat.origin.x()) / h)),
                                          int(std::floor((v.y() - lat.origin.y()) / h)),
                                          int(std::floor((v.z() - lat.origin.z()) / h))};
            occupied[HexLattice::pack(c)] = 1;
        }
    };
    add_vertex_cells(anatomy.skin);
    add_vertex_cells(anatomy.skull);
    add_vertex_cells(anatomy.jaw);
    if (occupied.empty()) throw RefinementError("voxelize: empty occupancy");

    // largest face-connected component containing skin-vertex cells
    std::unordered_map<std::int64_t, int> component;
    int n_comp = 0;
    for (const auto& [key, _] : occupied) {
        if (component.count(key)) continue;
        const int comp = n_comp++;
        std::queue<std::int64_t> queue;
        queue.push(key);
        component[key] = comp;
        while (!queue.empty()) {
            const std::int64_t cur = queue.front();
            queue.pop();
            const int ci = int((cur >> 42) & 0x1FFFFF) - 0x100000;
            const int cj = int((cur >> 21) & 0x1FFFFF) - 0x100000;
            const int ck = int(cur & 0x1FFFFF) - 0x100000;
            const std::array<std::array<int, 3>, 6> nbrs = {
                {{ci + 1, cj, ck}, {ci - 1, cj, ck}, {ci, cj + 1, ck},
                 {ci, cj - 1, ck}, {ci, cj, ck + 1}, {ci, cj, ck - 1}}};
            for (const auto& nb : nbrs) {
                const std::int64_t nk = HexLattice::pack(nb);
                if (occupied.count(nk) && !component.count(nk)) {
                    component[nk] = comp;
                    queue.push(nk);
                }
            }
        }
    }
    std::vector<std::int64_t> comp_size(n_comp, 0);
    for (const auto& [key, comp] : component) comp_size[comp]++;
    std::vector<char> has_skin(n_comp, 0);
    for (const Vec3& v : anatomy.skin.vertices) {
        const std::array<int, 3> c = {int(std::floor((v.x() - lat.origin.x()) / h)),
                                      int(std::floor((v.y() - lat.origin.y()) / h)),
                                      int(std::floor((v.z() - lat.origin.z()) / h))};
        has_skin[component.at(HexLattice::pack(c))] = 1;
    }
    int best_comp = -1;
    std::int64_t best_size = -1;
    for (int c = 0; c < n_comp; ++c)
        if (has_skin[c] && comp_size[c] > best_size) {
            best_size = comp_size[c];
            best_comp = c;
        }
    if (best_comp < 0) throw RefinementError("voxelize: no component contains skin vertices");

    for (const auto& [key, comp] : component) {
        if (comp != best_comp) continue;
        lat.cells.push_back({int((key >> 42) & 0x1FFFFF) - 0x100000,
                             int((key >> 21) & 0x1FFFFF) - 0x100000,
                             int(key & 0x1FFFFF) - 0x100000});
    }
    std::sort(lat.cells.begin(), lat.cells.end());

    // nodes = union of cell corners, lexicographically indexed
    std::unordered_map<std::int64_t, int> node_ids;
    std::vector<std::array<int, 3>> node_keys;
    for (const auto& c : lat.cells)
        for (int corner = 0; corner < 8; ++corner) {
            const std::array<int, 3> nk = {c[0] + ((corner >> 0) & 1), c[1] + ((corner >> 1) & 1),
                                           c[2] + ((corner >> 2) & 1)};
            if (node_ids.emplace(HexLattice::pack(nk), 0).second) node_keys.push_back(nk);
        }
    std::sort(node_keys.begin(), node_keys.end());
    for (std::size_t i = 0; i < node_keys.size(); ++i)
        node_ids[HexLattice::pack(node_keys[i])] = int(i);

    lat.nodes.reserve(node_keys.size());
    for (const auto& nk : node_keys)
        lat.nodes.push_back(lat.origin + h * Vec3(nk[0], nk[1], nk[2]));

    lat.elements.reserve(lat.cells.size());
    for (const auto& c : lat.cells) {
        std::array<int, 8> elem;
        for (int corner = 0; corner < 8; ++corner) {
            const std::array<int, 3> nk = {c[0] + ((corner >> 0) & 1), c[1] + ((corner >> 1) & 1),
                                           c[2] + ((corner >> 2) & 1)};
            elem[corner] = node_ids.at(HexLattice::pack(nk));
        }
        lat.elements.push_back(elem);
    }
    lat.build_index();
    return lat;
}

inline Embedding embed(const HexLattice& lattice, const TriMesh& mesh, SurfaceTag tag) {
    Embedding emb;
    emb.tag = tag;
    emb.rows = mesh.vertex_count();
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        const int e = lattice.locate(mesh.vertices[v]);
        if (e < 0)
            throw InvalidInputError("embed: vertex " + std::to_string(v) + " of surface " +
                                    to_string(tag) + " lies outside the lattice");
        const Vec3 local =
            ((mesh.vertices[v] - lattice.cell_min(e)) / lattice.h).cwiseMax(0.0).cwiseMin(1.0);
        const TrilinearBasis basis = trilinear_basis(local, lattice.h);
        for (int c = 0; c < 8; ++c)
            emb.weights.push_back({v, lattice.elements[e][c], basis.weights[c]});
    }
    return emb;
}

enum class Quadrature { Center, Gauss8 };

/// Local quadrature points in [0,1]^3 and their weights (fractions of V_e).
inline std::vector<std::pair<Vec3, double>> quadrature_points(Quadrature q) {
    if (q == Quadrature::Center) return {{Vec3::Constant(0.5), 1.0}};
    std::vector<std::pair<Vec3, double>> pts;
    const double a = 0.5 - 0.5 / std::sqrt(3.0);
    const double b = 0.5 + 0.5 / std::sqrt(3.0);
    for (int c = 0; c < 8; ++c)
        pts.push_back({Vec3((c & 1) ? b : a, (c & 2) ? b : a, (c & 4) ? b : a), 0.125});
    return pts;
}

/// Deformation gradient of the trilinear element map at local point q.
inline Mat3 element_gradient(const HexLattice& lattice, std::span<const Vec3> u, int e,
                             const Vec3& local) {
    const TrilinearBasis basis = trilinear_basis(local, lattice.h);
    Mat3 f = Mat3::Zero();
    for (int c = 0; c < 8; ++c)
        f += u[lattice.elements[e][c]] * basis.gradients[c].transpose();
    return f;
}

enum class SoftSampleMode { VolumeUniform, PerElementCenters };

struct SoftSamples {
    std::vector<Vec3> points;
    std::vector<int> element;
};

inline SoftSamples sample_soft_points(const HexLattice& lattice, int n, std::uint64_t seed,
                                      SoftSampleMode mode) {
    SoftSamples out;
    if (mode == SoftSampleMode::PerElementCenters) {
        out.points.reserve(lattice.element_count());
        for (int e = 0; e < lattice.element_count(); ++e) {
            out.points.push_back(lattice.cell_center(e));
            out.element.push_back(e);
        }
        return out;
    }
    if (n < 1) throw InvalidInputError("sample_soft_points: n must be >= 1");
    Rng rng(seed);
    out.points.reserve(n);
    for (int i = 0; i < n; ++i) {
        const int e = int(rng.below(std::uint64_t(lattice.element_count())));
        const Vec3 local(rng.uniform(), rng.uniform(), rng.uniform());
        out.points.push_back(lattice.cell_min(e) + lattice.h * local);
        out.element.push_back(e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// latv1 file format

inline void save_lattice(const HexLattice& lat, const std::vector<Embedding>& embeddings,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write lattice file: " + path);
    char buf[160];
    out << "latv1\n";
    std::snprintf(buf, sizeof buf, "origin %.17g %.17g %.17g\n", lat.origin.x(), lat.origin.y(),
                  lat.origin.z());
    out << buf;
    std::snprintf(buf, sizeof buf, "h %.17g\n", lat.h);
    out << buf;
    out << "cells " << lat.cells.size() << "\nnodes " << lat.nodes.size() << "\nelements "
        << lat.elements.size() << "\nembeddings " << embeddings.size() << "\n";
    for (const auto& c : lat.cells) out << "c " << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
    for (const auto& n : lat.nodes) {
        std::snprintf(buf, sizeof buf, "n %.17g %.17g %.17g\n", n.x(), n.y(), n.z());
        out << buf;
    }
    for (const auto& e : lat.elements) {
        out << "e";
        for (int id : e) out << ' ' << id;
        out << '\n';
    }
    for (const auto& emb : embeddings) {
        out << "surface " << to_string(emb.tag) << ' ' << emb.rows << ' ' << emb.weights.size()
            << '\n';
        for (const auto& t : emb.weights) {
            std::snprintf(buf, sizeof buf, "w %d %d %.17g\n", t.row, t.col, t.w);
            out << buf;
        }
    }
    if (!out) throw IoError("failed while writing lattice file: " + path);
}

inline std::pair<HexLattice, std::vector<Embedding>> load_lattice(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lattice file: " + path);
    std::string tok;
    in >> tok;
    if (tok != "latv1") throw IoError("lattice file is not latv1: " + path);
    HexLattice lat;
    std::size_t n_cells = 0, n_nodes = 0, n_elems = 0, n_embs = 0;
    in >> tok >> lat.origin.x() >> lat.origin.y() >> lat.origin.z();
    in >> tok >> lat.h;
    in >> tok >> n_cells >> tok >> n_nodes >> tok >> n_elems >> tok >> n_embs;
    lat.cells.resize(n_cells);
    for (auto& c : lat.cells) in >> tok >> c[0] >> c[1] >> c[2];
    lat.nodes.resize(n_nodes);
    for (auto& n : lat.nodes) in >> tok >> n.x() >> n.y() >> n.z();
    lat.elements.resize(n_elems);
    for (auto& e : lat.elements) {
        in >> tok;
        for (int& id : e) in >> id;
    }
    std::vector<Embedding> embs(n_embs);
    for (auto& emb : embs) {
        std::string tag;
        std::size_t nnz = 0;
        in >> tok >> tag >> emb.rows >> nnz;
        emb.tag = tag == "skin" ? SurfaceTag::Skin
                                : (tag == "skull" ? SurfaceTag::Skull : SurfaceTag::Jaw);
        emb.weights.resize(nnz);
        for (auto& t : emb.weights) in >> tok >> t.row >> t.col >> t.w;
    }
    if (!in) throw IoError("truncated lattice file: " + path);
    lat.build_index();
    return {std::move(lat), std::move(embs)};
}

} // namespace physface

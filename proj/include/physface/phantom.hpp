#pragma once

// Synthetic anatomy and expression corpus. An ellipsoidal head with skull and
// jaw stands in for captured data: identity anatomies come from an analytic
// warp of the canonical head, ground-truth expression maps are rigid hinge
// blends composed with compactly supported bulge stretches, and both expose
// exact Jacobians. The bone regression oracle replaces the external
// parametric bone generator.

#include "physface/deform_map.hpp"
#include "physface/mesh_queries.hpp"
#include "physface/numerics.hpp"
#include "physface/sampling.hpp"
#include "physface/shapes.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

namespace physface {
namespace phantom {

// Canonical head geometry (mm). Width 160 along x.
struct Canon {
    static constexpr int kIdDims = 4;
    static constexpr int kExprDims = 6;

    Vec3 skin_center{0, 0, 0}, skin_semi{80, 90, 75};
    Vec3 skull_center{0, 20, -4}, skull_semi{54, 46, 50};
    Vec3 jaw_center{0, -44, 16}, jaw_semi{35, 10, 24};
    Vec3 hinge_pivot{0, -24, -40};
    Vec3 hinge_axis{1, 0, 0};
    int skin_subdiv = 3, bone_subdiv = 2;

    // identity warp: displacement amplitudes per component and radial ramp
    Vec3 warp_a4[4] = {}; // unused slot pattern; see amplitudes()
    static Eigen::Vector4d amplitudes() { return {1.5, 1.2, 1.2, 0.9}; }
    static constexpr double ramp_r0 = 5.0, ramp_r1 = 50.0;

    // expression decode ranges
    static constexpr double max_jaw_angle = 0.35;  // rad
    static constexpr double max_jaw_slide = 1.5;   // mm
    static constexpr double bulge_kn = 0.20, bulge_kt = 0.10;
    static constexpr double bulge_radius = 8.0, bulge_falloff = 4.5;

    // blend shaping
    static constexpr double blend_lo = 0.15, blend_hi = 0.85;

    // back-of-head low-confidence band
    static constexpr double low_conf_z = -37.5, low_conf_value = 0.1;

    std::array<Vec3, 2> bulge_sites() const { return {Vec3(45, -10, 38), Vec3(-45, -10, 38)}; }
};

inline const Canon& canon() {
    static const Canon c;
    return c;
}

namespace detail {

inline double smooth5(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

inline double smooth5_d(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return 30.0 * t * t * (t - 1.0) * (t - 1.0);
}

} // namespace detail

/// Identity warp W(X; p): X + ramp(|X|) * sum_k p_k a_k Y_k(n) n with
/// low-order direction harmonics Y_k. Linear in p, exact Jacobian, and
/// invertible on the head for |p| <= 1 by amplitude budget.
class IdentityWarp {
  public:
    explicit IdentityWarp(const Eigen::Vector4d& params = Eigen::Vector4d::Zero())
        : p_(params) {
        if ((p_.array().abs() > 1.0 + 1e-12).any())
            throw InvalidInputError("identity parameters must lie in [-1,1]");
    }

    const Eigen::Vector4d& params() const { return p_; }

    /// Per-parameter displacement basis (warp is p-linear): W(X) = X + B(X) p.
    Eigen::Matrix<double, 3, 4> basis(const Vec3& x) const {
        const double r = x.norm();
        Eigen::Matrix<double, 3, 4> b = Eigen::Matrix<double, 3, 4>::Zero();
        if (r < 1e-12) return b;
        const Vec3 n = x / r;
        const double ramp =
            detail::smooth5((r - Canon::ramp_r0) / (Canon::ramp_r1 - Canon::ramp_r0));
        const Eigen::Vector4d a = Canon::amplitudes();
        const double y[4] = {n.y(), n.x() * n.x() - n.z() * n.z(), n.y() * n.z(),
                             n.x() * n.y()};
        for (int k = 0; k < 4; ++k) b.col(k) = ramp * a[k] * y[k] * n;
        return b;
    }

    Vec3 apply(const Vec3& x) const { return x + basis(x) * p_; }

    Mat3 jacobian(const Vec3& x) const {
        // exact chain rule through r, n and the ramp
        const double r = x.norm();
        if (r < 1e-12) return Mat3::Identity();
        const Vec3 n = x / r;
        const Mat3 dn = (Mat3::Identity() - n * n.transpose()) / r;
        const double span = Canon::ramp_r1 - Canon::ramp_r0;
        const double t = (r - Canon::ramp_r0) / span;
        const double ramp = detail::smooth5(t);
        const double dramp = detail::smooth5_d(t) / span;
        const Eigen::Vector4d a = Canon::amplitudes();

        const double y[4] = {n.y(), n.x() * n.x() - n.z() * n.z(), n.y() * n.z(),
                             n.x() * n.y()};
        Vec3 dy[4]; // gradients of Y_k w.r.t. n
        dy[0] = Vec3(0, 1, 0);
        dy[1] = Vec3(2 * n.x(), 0, -2 * n.z());
        dy[2] = Vec3(0, n.z(), n.y());
        dy[3] = Vec3(n.y(), n.x(), 0);

        Mat3 j = Mat3::Identity();
        for (int k = 0; k < 4; ++k) {
            const double c = p_[k] * a[k];
            // d/dx [ramp y n] = n (dramp y n^T + ramp dy^T dn) + ramp y dn
            j += c * (n * (dramp * y[k] * n.transpose() +
                           ramp * (dn.transpose() * dy[k]).transpose()) +
                      ramp * y[k] * dn);
        }
        return j;
    }

    /// Newton inverse; the warp is a small smooth perturbation of identity.
    Vec3 invert(const Vec3& x) const {
        Vec3 y = x;
        for (int it = 0; it < 20; ++it) {
            const Vec3 r = apply(y) - x;
            if (r.norm() < 1e-13 * (1.0 + x.norm())) break;
            y -= jacobian(y).partialPivLu().solve(r);
        }
        return y;
    }

  private:
    Eigen::Vector4d p_;
};

struct Hinge {
    Vec3 axis = Vec3::UnitX();  // unit
    Vec3 pivot = Vec3::Zero();  // mm

    Vec3 slide_dir() const { return axis.cross(Vec3::UnitY()).normalized(); }

    RigidTransform transform(double angle, double slide) const {
        RigidTransform t;
        t.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
        t.translation = pivot - t.rotation * pivot + slide * slide_dir();
        return t;
    }
};

struct Anatomy {
    TriMesh skin, skull, jaw;
    Hinge hinge;
    std::vector<int> landmark_ids;       // skin vertex indices
    Eigen::Vector4d id_params = Eigen::Vector4d::Zero();
};

struct Bulge {
    Vec3 center;        // mm
    double radius;      // support radius (mm)
    Mat3 stretch;       // symmetric, det > 0
    double falloff;     // transition width (mm)
};

struct ExpressionSpec {
    double jaw_angle = 0.0;  // rad, in [0, 0.5]
    double jaw_slide = 0.0;  // mm along hinge tangent
    std::vector<Bulge> bulges;
    VecX expression_code;    // the gamma-hat stand-in that generated this spec

    bool is_zero() const {
        return jaw_angle == 0.0 && jaw_slide == 0.0 && bulges.empty();
    }
};

namespace detail {

inline void validate_spec(const ExpressionSpec& spec) {
    if (!(spec.jaw_angle >= 0.0 && spec.jaw_angle <= 0.5))
        throw InvalidInputError("ExpressionSpec: jaw_angle outside [0, 0.5] rad");
    for (const Bulge& b : spec.bulges) {
        if ((b.stretch - b.stretch.transpose()).norm() > 1e-9)
            throw InvalidInputError("ExpressionSpec: bulge stretch not symmetric");
        if (b.stretch.determinant() <= 0.0)
            throw InvalidInputError("ExpressionSpec: bulge stretch must have det > 0");
    }
}

} // namespace detail

inline TriMesh apply_confidence_band(TriMesh mesh) {
    mesh.confidence.assign(mesh.vertex_count(), 1.0);
    for (int v = 0; v < mesh.vertex_count(); ++v)
        if (mesh.vertices[v].z() < Canon::low_conf_z)
            mesh.confidence[v] = Canon::low_conf_value;
    return mesh;
}

inline Anatomy make_canonical() {
    const Canon& c = canon();
    Anatomy a;
    a.skin = apply_confidence_band(make_ellipsoid(c.skin_center, c.skin_semi, c.skin_subdiv));
    a.skull = make_ellipsoid(c.skull_center, c.skull_semi, c.bone_subdiv);
    a.jaw = make_ellipsoid(c.jaw_center, c.jaw_semi, c.bone_subdiv);
    a.hinge.pivot = c.hinge_pivot;
    a.hinge.axis = c.hinge_axis;

    // landmarks: farthest-point sampling over skin vertices, seeded at the
    // vertex nearest the face front
    int start = 0;
    double best = -1e300;
    for (int v = 0; v < a.skin.vertex_count(); ++v)
        if (a.skin.vertices[v].z() > best) {
            best = a.skin.vertices[v].z();
            start = v;
        }
    std::vector<double> dist(a.skin.vertex_count(), std::numeric_limits<double>::max());
    int cur = start;
    for (int k = 0; k < 64; ++k) {
        a.landmark_ids.push_back(cur);
        int far = 0;
        double fd = -1.0;
        for (int v = 0; v < a.skin.vertex_count(); ++v) {
            dist[v] = std::min(dist[v], (a.skin.vertices[v] - a.skin.vertices[cur]).norm());
            if (dist[v] > fd) {
                fd = dist[v];
                far = v;
            }
        }
        cur = far;
    }
    return a;
}

inline Anatomy make_identity(const Eigen::Vector4d& id_params,
                             const Anatomy& canonical) {
    IdentityWarp warp(id_params);
    Anatomy a = canonical;
    a.id_params = id_params;
    for (Vec3& v : a.skin.vertices) v = warp.apply(v);
    for (Vec3& v : a.skull.vertices) v = warp.apply(v);
    for (Vec3& v : a.jaw.vertices) v = warp.apply(v);
    const Mat3 jp = warp.jacobian(canonical.hinge.pivot);
    a.hinge.pivot = warp.apply(canonical.hinge.pivot);
    a.hinge.axis = (jp * canonical.hinge.axis).normalized();

    // invertibility probe: 20^3 grid over the skin bounding box
    auto [lo, hi] = a.skin.bounding_box();
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j)
            for (int k = 0; k < 20; ++k) {
                const Vec3 t(i / 19.0, j / 19.0, k / 19.0);
                const Vec3 x = lo + t.cwiseProduct(hi - lo);
                if (warp.jacobian(x).determinant() <= 0.0)
                    throw NumericError("identity warp non-invertible on probe grid");
            }
    return a;
}

/// Ground-truth expression map: bulge stretches composed with the rigid
/// hinge blend. Exactly identity on the skull, exactly the hinge transform
/// on the jaw (dead zones), C^2 elsewhere, exact Jacobian.
class GroundTruthMap final : public DeformationMap {
  public:
    GroundTruthMap(const Anatomy& anatomy, const ExpressionSpec& spec)
        : warp_(anatomy.id_params), spec_(spec),
          jaw_t_(anatomy.hinge.transform(spec.jaw_angle, spec.jaw_slide)) {
        detail::validate_spec(spec);
        const Canon& c = canon();
        skull_scale_ = std::cbrt(c.skull_semi.prod());
        jaw_scale_ = std::cbrt(c.jaw_semi.prod());
    }

    Vec3 eval(const Vec3& x) const override {
        Vec3 z = x;
        for (const Bulge& b : spec_.bulges) z = bulge_eval(b, z);
        return rigid_blend_eval(z);
    }

    Mat3 jacobian(const Vec3& x) const override {
        Vec3 z = x;
        Mat3 j = Mat3::Identity();
        for (const Bulge& b : spec_.bulges) {
            j = bulge_jacobian(b, z) * j;
            z = bulge_eval(b, z);
        }
        return rigid_blend_jacobian(z) * j;
    }

    const RigidTransform& jaw_transform() const { return jaw_t_; }

    /// Blend weight toward the jaw transform: 1 on the jaw shell, 0 on the
    /// skull shell.
    double blend_weight(const Vec3& x) const {
        double u;
        Vec3 du;
        blend_u(x, u, du);
        return 1.0 - detail::smooth5((u - Canon::blend_lo) / (Canon::blend_hi - Canon::blend_lo));
    }

    /// True where the map is exactly rigid (bone dead zones, clear of bulges).
    bool in_rigid_zone(const Vec3& x) const {
        for (const Bulge& b : spec_.bulges)
            if ((x - b.center).norm() < b.radius + 1e-9) return false;
        double u;
        Vec3 du;
        blend_u(x, u, du);
        return u <= Canon::blend_lo - 1e-9 || u >= Canon::blend_hi + 1e-9;
    }

  private:
    static Vec3 bulge_eval(const Bulge& b, const Vec3& x) {
        const Vec3 d = x - b.center;
        const double r = d.norm();
        return x + eta(b, r) * ((b.stretch - Mat3::Identity()) * d);
    }

    static Mat3 bulge_jacobian(const Bulge& b, const Vec3& x) {
        const Vec3 d = x - b.center;
        const double r = d.norm();
        const Mat3 sm1 = b.stretch - Mat3::Identity();
        Mat3 j = Mat3::Identity() + eta(b, r) * sm1;
        if (r > 1e-12) j += (sm1 * d) * (eta_d(b, r) / r) * d.transpose();
        return j;
    }

    static double eta(const Bulge& b, double r) {
        const double plateau = std::max(0.0, b.radius - b.falloff);
        if (r <= plateau) return 1.0;
        if (r >= b.radius) return 0.0;
        return 1.0 - detail::smooth5((r - plateau) / (b.radius - plateau));
    }

    static double eta_d(const Bulge& b, double r) {
        const double plateau = std::max(0.0, b.radius - b.falloff);
        if (r <= plateau || r >= b.radius) return 0.0;
        const double span = b.radius - plateau;
        return -detail::smooth5_d((r - plateau) / span) / span;
    }

    // q: approximate mm distance to a bone through the inverse identity warp
    double bone_q(const Vec3& y, const Vec3& center, const Vec3& semi, double scale,
                  Vec3& grad_y) const {
        const Vec3 e = (y - center).cwiseQuotient(semi);
        const double n = e.norm();
        grad_y = scale * e.cwiseQuotient(semi) / std::max(n, 1e-12);
        return scale * (n - 1.0);
    }

    void blend_u(const Vec3& x, double& u, Vec3& du) const {
        const Canon& c = canon();
        const Vec3 y = warp_.invert(x);
        const Mat3 jw_inv = warp_.jacobian(y).inverse();
        Vec3 gs_y, gj_y;
        const double qs = bone_q(y, c.skull_center, c.skull_semi, skull_scale_, gs_y);
        const double qj = bone_q(y, c.jaw_center, c.jaw_semi, jaw_scale_, gj_y);
        const Vec3 gs = jw_inv.transpose() * gs_y;
        const Vec3 gj = jw_inv.transpose() * gj_y;
        const double denom = qs + qj;
        if (std::abs(denom) < 1e-12) {
            u = 0.5;
            du = Vec3::Zero();
            return;
        }
        u = qj / denom;
        du = (gj * denom - qj * (gs + gj)) / (denom * denom);
    }

    Vec3 rigid_blend_eval(const Vec3& x) const {
        const double w = blend_weight(x);
        if (w == 0.0) return x;
        if (w == 1.0) return jaw_t_.apply(x);
        return (1.0 - w) * x + w * jaw_t_.apply(x);
    }

    Mat3 rigid_blend_jacobian(const Vec3& x) const {
        double u;
        Vec3 du;
        blend_u(x, u, du);
        const double span = Canon::blend_hi - Canon::blend_lo;
        const double t = (u - Canon::blend_lo) / span;
        const double w = 1.0 - detail::smooth5(t);
        const Vec3 dw = -(detail::smooth5_d(t) / span) * du;
        Mat3 j = (1.0 - w) * Mat3::Identity() + w * jaw_t_.rotation;
        j += (jaw_t_.apply(x) - x) * dw.transpose();
        return j;
    }

    IdentityWarp warp_;
    ExpressionSpec spec_;
    RigidTransform jaw_t_;
    double skull_scale_ = 1.0, jaw_scale_ = 1.0;
};

inline std::unique_ptr<GroundTruthMap> ground_truth_map(const Anatomy& anatomy,
                                                        const ExpressionSpec& spec) {
    return std::make_unique<GroundTruthMap>(anatomy, spec);
}

/// Decode an expression parameter vector (the gamma-hat stand-in) into a
/// concrete spec. Sites are anchored to the identity anatomy.
inline ExpressionSpec decode_expression(const VecX& code, const Anatomy& anatomy) {
    if (code.size() != Canon::kExprDims)
        throw InvalidInputError("expression code must have 6 components");
    const Canon& c = canon();
    ExpressionSpec spec;
    spec.expression_code = code;
    spec.jaw_angle = Canon::max_jaw_angle * std::clamp(code[0], 0.0, 1.0);
    spec.jaw_slide = Canon::max_jaw_slide * std::clamp(code[1], -1.0, 1.0);

    IdentityWarp warp(anatomy.id_params);
    const auto sites = c.bulge_sites();
    for (int s = 0; s < 2; ++s) {
        const double u = std::clamp(code[2 + 2 * s], -1.0, 1.0);
        const double v = std::clamp(code[3 + 2 * s], -1.0, 1.0);
        if (u == 0.0 && v == 0.0) continue;
        Bulge b;
        b.center = warp.apply(sites[s]);
        b.radius = Canon::bulge_radius;
        b.falloff = Canon::bulge_falloff;
        const Vec3 n = sites[s].normalized();
        b.stretch = Mat3::Identity() + u * Canon::bulge_kn * (n * n.transpose()) +
                    v * Canon::bulge_kt * (Mat3::Identity() - n * n.transpose());
        spec.bulges.push_back(b);
    }
    return spec;
}

/// Closed-form bone regression standing in for the external parametric bone
/// generator: least-squares identity parameters from skin vertex positions
/// (the warp is parameter-linear), bones re-synthesized from the fit.
class SkinToBoneOracle {
  public:
    explicit SkinToBoneOracle(const Anatomy& canonical) : canonical_(&canonical) {
        IdentityWarp w0;
        const auto& verts = canonical.skin.vertices;
        basis_.resize(3 * verts.size(), 4);
        for (std::size_t i = 0; i < verts.size(); ++i)
            basis_.block<3, 4>(3 * i, 0) = w0.basis(verts[i]);
        solver_ = (basis_.transpose() * basis_).ldlt();
    }

    /// Identity parameters best explaining the given skin vertex positions.
    Eigen::Vector4d regress(const std::vector<Vec3>& skin_positions) const {
        const auto& verts = canonical_->skin.vertices;
        if (skin_positions.size() != verts.size())
            throw InvalidInputError("oracle: skin vertex count mismatch");
        VecX rhs(3 * verts.size());
        for (std::size_t i = 0; i < verts.size(); ++i)
            rhs.segment<3>(3 * i) = skin_positions[i] - verts[i];
        return solver_.solve(basis_.transpose() * rhs);
    }

    /// Predicted positions of canonical bone points under the regressed warp.
    std::vector<Vec3> predict_bones(const Eigen::Vector4d& params,
                                    const std::vector<Vec3>& canonical_bone_points) const {
        IdentityWarp w(clamp(params));
        std::vector<Vec3> out;
        out.reserve(canonical_bone_points.size());
        for (const Vec3& p : canonical_bone_points) out.push_back(w.apply(p));
        return out;
    }

    /// d predicted_bone / d skin_positions is linear; this applies its
    /// transpose to per-bone-point gradient vectors.
    std::vector<Vec3> backprop_to_skin(const std::vector<Vec3>& canonical_bone_points,
                                       const std::vector<Vec3>& grad_bones) const {
        IdentityWarp w0;
        Eigen::Vector4d gp = Eigen::Vector4d::Zero();
        for (std::size_t i = 0; i < canonical_bone_points.size(); ++i)
            gp += w0.basis(canonical_bone_points[i]).transpose() * grad_bones[i];
        // params = (B^T B)^{-1} B^T (skin - skin0)
        const VecX gskin_flat = basis_ * solver_.solve(gp);
        std::vector<Vec3> out(basis_.rows() / 3);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = gskin_flat.segment<3>(3 * i);
        return out;
    }

  private:
    static Eigen::Vector4d clamp(Eigen::Vector4d p) {
        return p.cwiseMax(-1.0).cwiseMin(1.0);
    }

    const Anatomy* canonical_;
    MatX basis_;
    Eigen::LDLT<MatX> solver_;
};

// ---------------------------------------------------------------------------
// Corpus generation

struct CorpusExpression {
    VecX code;
    ExpressionSpec spec;
    std::string skin_file;
};

struct CorpusIdentity {
    Eigen::Vector4d id_params;
    std::string dir;
    std::vector<CorpusExpression> expressions;
};

struct CorpusManifest {
    std::uint64_t seed = 0;
    int n_ids = 0;
    int n_exprs = 0;
    std::vector<CorpusIdentity> identities;
    std::string root;

    std::string neutral_path(int id, const std::string& part) const {
        return root + "/" + identities[id].dir + "/neutral_" + part + ".obj";
    }
    std::string skin_path(int id, int expr) const {
        return root + "/" + identities[id].dir + "/" + identities[id].expressions[expr].skin_file;
    }
    std::string landmarks_path(int id) const {
        return root + "/" + identities[id].dir + "/landmarks.txt";
    }
};

inline nlohmann::json manifest_to_json(const CorpusManifest& m) {
    nlohmann::json j;
    j["format"] = "phantom-corpus-v1";
    j["seed"] = m.seed;
    j["n_ids"] = m.n_ids;
    j["n_exprs"] = m.n_exprs;
    auto& ids = j["identities"] = nlohmann::json::array();
    for (const auto& ident : m.identities) {
        nlohmann::json ji;
        ji["dir"] = ident.dir;
        ji["params"] = std::vector<double>(ident.id_params.data(), ident.id_params.data() + 4);
        auto& exprs = ji["expressions"] = nlohmann::json::array();
        for (const auto& e : ident.expressions) {
            nlohmann::json je;
            je["code"] = std::vector<double>(e.code.data(), e.code.data() + e.code.size());
            je["skin"] = e.skin_file;
            je["jaw_angle"] = e.spec.jaw_angle;
            je["jaw_slide"] = e.spec.jaw_slide;
            exprs.push_back(je);
        }
        ids.push_back(ji);
    }
    return j;
}

inline CorpusManifest load_corpus_manifest(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw IoError("cannot open corpus manifest in " + dir);
    nlohmann::json j;
    in >> j;
    CorpusManifest m;
    m.root = dir;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n_ids = j.at("n_ids").get<int>();
    m.n_exprs = j.at("n_exprs").get<int>();
    const Anatomy canonical = make_canonical();
    for (const auto& ji : j.at("identities")) {
        CorpusIdentity ident;
        ident.dir = ji.at("dir").get<std::string>();
        const auto p = ji.at("params").get<std::vector<double>>();
        ident.id_params = Eigen::Vector4d(p[0], p[1], p[2], p[3]);
        const Anatomy anat = make_identity(ident.id_params, canonical);
        for (const auto& je : ji.at("expressions")) {
            CorpusExpression e;
            const auto code = je.at("code").get<std::vector<double>>();
            e.code = Eigen::Map<const VecX>(code.data(), code.size());
            e.skin_file = je.at("skin").get<std::string>();
            e.spec = decode_expression(e.code, anat);
            ident.expressions.push_back(e);
        }
        m.identities.push_back(ident);
    }
    return m;
}

inline CorpusManifest gen_corpus(int n_ids, int n_exprs, std::uint64_t seed,
                                 const std::string& out_dir) {
    if (n_ids < 1 || n_exprs < 1)
        throw InvalidInputError("gen_corpus: need n_ids >= 1 and n_exprs >= 1");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir))
        throw IoError("gen_corpus: cannot create output directory " + out_dir);

    const Anatomy canonical = make_canonical();
    Rng id_rng = Rng(seed).fork(1);
    Rng expr_rng = Rng(seed).fork(2);

    CorpusManifest manifest;
    manifest.seed = seed;
    manifest.n_ids = n_ids;
    manifest.n_exprs = n_exprs;
    manifest.root = out_dir;

    for (int k = 0; k < n_ids; ++k) {
        CorpusIdentity ident;
        ident.dir = "id_" + std::to_string(k);
        Eigen::Vector4d p;
        for (int i = 0; i < 4; ++i) p[i] = id_rng.uniform(-0.7, 0.7);
        ident.id_params = p;
        const Anatomy anat = make_identity(p, canonical);

        const std::string idir = out_dir + "/" + ident.dir;
        fs::create_directories(idir, ec);
        save_obj(anat.skin, idir + "/neutral_skin.obj");
        save_obj(anat.skull, idir + "/neutral_skull.obj");
        save_obj(anat.jaw, idir + "/neutral_jaw.obj");
        {
            std::ofstream lm(idir + "/landmarks.txt");
            for (int id : anat.landmark_ids) lm << id << "\n";
        }

        for (int j = 0; j < n_exprs; ++j) {
            CorpusExpression e;
            VecX code = VecX::Zero(Canon::kExprDims);
            if (j > 0) { // expression 0 is the designated neutral
                code[0] = expr_rng.uniform(0.15, 1.0);
                for (int c = 1; c < Canon::kExprDims; ++c) code[c] = expr_rng.uniform(-1.0, 1.0);
            }
            e.code = code;
            e.spec = decode_expression(code, anat);
            e.skin_file = "expr_" + std::to_string(j) + "_skin.obj";

            GroundTruthMap map(anat, e.spec);
            TriMesh skin = anat.skin;
            for (Vec3& v : skin.vertices) v = map.eval(v);
            save_obj(skin, idir + "/" + e.skin_file);
            ident.expressions.push_back(e);
        }
        manifest.identities.push_back(ident);
    }

    std::ofstream out(out_dir + "/manifest.json");
    out << manifest_to_json(manifest).dump(2) << "\n";
    if (!out) throw IoError("gen_corpus: failed writing manifest");
    return manifest;
}

/// Frontal-half evaluation mask (vertex ids), shared across identities by
/// topology correspondence.
inline std::vector<int> frontal_mask(const TriMesh& canonical_skin) {
    std::vector<int> ids;
    for (int v = 0; v < canonical_skin.vertex_count(); ++v)
        if (canonical_skin.vertices[v].z() > 0.0) ids.push_back(v);
    return ids;
}

/// Synthetic pinhole camera for landmark fitting, looking at the face front.
inline Mat34 default_camera() {
    const double f = 800.0, cx = 256.0, cy = 256.0;
    Mat3 k;
    k << f, 0, cx, 0, f, cy, 0, 0, 1;
    Mat3 r;
    r << 1, 0, 0, 0, -1, 0, 0, 0, -1; // looks along -z from (0,0,350)
    const Vec3 c(0, 0, 350);
    Mat34 p;
    p.leftCols<3>() = k * r;
    p.col(3) = -k * r * c;
    return p;
}

/// Skin vertex bands used as collision region tags (upper / lower mouth
/// analogs on the front of the head).
inline std::pair<std::vector<int>, std::vector<int>> mouth_bands(const TriMesh& skin) {
    std::vector<int> upper, lower;
    for (int v = 0; v < skin.vertex_count(); ++v) {
        const Vec3& p = skin.vertices[v];
        if (p.z() < 45.0 || std::abs(p.x()) > 40.0) continue;
        if (p.y() > 2.0 && p.y() < 26.0) upper.push_back(v);
        if (p.y() < -2.0 && p.y() > -30.0) lower.push_back(v);
    }
    return {upper, lower};
}

} // namespace phantom
} // namespace physface

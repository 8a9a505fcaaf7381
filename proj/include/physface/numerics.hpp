#pragma once

// Dense 3x3 kernels: SVD, polar decomposition, weighted Procrustes, the
// determinant-one projection used by the volume term, and trilinear bases.
// All pure functions, fixed tolerances (they define the test contract).

#include "physface/types.hpp"

#include <array>
#include <cmath>
#include <span>

namespace physface {

struct Svd3 {
    Mat3 u;
    Vec3 sigma; // descending, nonnegative
    Mat3 v;
};

namespace detail {

// One cyclic Jacobi sweep pair (p,q): rotate to annihilate a(p,q).
inline void jacobi_rotate(Mat3& a, Mat3& v, int p, int q) {
    const double apq = a(p, q);
    if (std::abs(apq) < 1e-300) return;
    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
    const double t = (theta >= 0 ? 1.0 : -1.0) /
                     (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;

    Mat3 g = Mat3::Identity();
    g(p, p) = c;
    g(q, q) = c;
    g(p, q) = s;
    g(q, p) = -s;
    a = g.transpose() * a * g;
    a(p, q) = a(q, p) = 0.0; // exact by construction of the rotation
    v = v * g;
}

// Symmetric 3x3 eigendecomposition by cyclic Jacobi. Eigenvalues descending.
inline void eig_sym3(const Mat3& m, Vec3& eval, Mat3& evec) {
    Mat3 a = 0.5 * (m + m.transpose());
    Mat3 v = Mat3::Identity();
    for (int sweep = 0; sweep < 32; ++sweep) {
        const double off = std::abs(a(0, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2));
        if (off <= 1e-14 * (std::abs(a(0, 0)) + std::abs(a(1, 1)) + std::abs(a(2, 2)) + 1e-300))
            break;
        jacobi_rotate(a, v, 0, 1);
        jacobi_rotate(a, v, 0, 2);
        jacobi_rotate(a, v, 1, 2);
    }
    eval = a.diagonal();
    // sort descending, keep columns paired
    std::array<int, 3> idx = {0, 1, 2};
    if (eval[idx[0]] < eval[idx[1]]) std::swap(idx[0], idx[1]);
    if (eval[idx[1]] < eval[idx[2]]) std::swap(idx[1], idx[2]);
    if (eval[idx[0]] < eval[idx[1]]) std::swap(idx[0], idx[1]);
    Vec3 e;
    Mat3 w;
    for (int i = 0; i < 3; ++i) {
        e[i] = eval[idx[i]];
        w.col(i) = v.col(idx[i]);
    }
    eval = e;
    evec = w;
}

} // namespace detail

/// SVD of a 3x3: m = u * diag(sigma) * v^T, sigma descending and nonnegative,
/// u and v orthogonal (det may be +-1). Jacobi eigendecomposition of m^T m
/// with column completion for rank-deficient inputs.
inline Svd3 svd3(const Mat3& m) {
    if (!finite(m)) throw InvalidInputError("svd3: non-finite input");

    Vec3 lambda;
    Mat3 v;
    detail::eig_sym3(m.transpose() * m, lambda, v);

    Svd3 out;
    out.v = v;
    for (int i = 0; i < 3; ++i) out.sigma[i] = std::sqrt(std::max(0.0, lambda[i]));

    const double scale = out.sigma[0];
    const double tiny = 1e-10 * (scale > 0 ? scale : 1.0);

    // u columns from m*v/sigma while well conditioned, completed orthogonally.
    int good = 0;
    for (int i = 0; i < 3; ++i) {
        if (out.sigma[i] > tiny) {
            out.u.col(i) = m * v.col(i) / out.sigma[i];
            good = i + 1;
        }
    }
    if (good == 0) {
        out.u = Mat3::Identity();
    } else if (good == 1) {
        Vec3 a = out.u.col(0);
        Vec3 t = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
        out.u.col(1) = a.cross(t).normalized();
        out.u.col(2) = a.cross(out.u.col(1)).normalized();
    } else if (good == 2) {
        out.u.col(2) = out.u.col(0).cross(out.u.col(1)).normalized();
    }
    // Gram-Schmidt pass keeps u orthogonal when sigma values nearly collapse.
    out.u.col(0).normalize();
    out.u.col(1) = (out.u.col(1) - out.u.col(0) * out.u.col(0).dot(out.u.col(1))).normalized();
    out.u.col(2) = (out.u.col(2) - out.u.col(0) * out.u.col(0).dot(out.u.col(2)) -
                    out.u.col(1) * out.u.col(1).dot(out.u.col(2)))
                       .normalized();
    return out;
}

struct Polar3 {
    Mat3 r; // in SO(3)
    Mat3 s; // symmetric, r * s = f
};

/// Polar decomposition f = r * s with r in SO(3) maximizing trace(r^T f).
/// Sign convention: when det(u v^T) < 0 the smallest singular value flips.
inline Polar3 polar3(const Mat3& f) {
    if (!finite(f)) throw InvalidInputError("polar3: non-finite input");
    const double fn = f.norm();
    if (fn <= 0.0) throw InvalidInputError("polar3: zero matrix");

    Svd3 svd = svd3(f);
    if (svd.sigma[1] <= 1e-12 * fn)
        throw DegenerateError("polar3: two zero singular values, rotation not unique");

    Vec3 d(1.0, 1.0, 1.0);
    if ((svd.u * svd.v.transpose()).determinant() < 0.0) d[2] = -1.0;

    Polar3 out;
    out.r = svd.u * d.asDiagonal() * svd.v.transpose();
    out.s = svd.v * (svd.sigma.cwiseProduct(d)).asDiagonal() * svd.v.transpose();
    out.s = 0.5 * (out.s + out.s.transpose());
    return out;
}

/// Weighted Kabsch: the rigid transform minimizing
/// sum_i w_i ||R p_i + t - q_i||^2. Unweighted when weights is empty.
inline RigidTransform kabsch(std::span<const Vec3> p, std::span<const Vec3> q,
                             std::span<const double> weights = {}) {
    if (p.size() != q.size() || p.size() < 3)
        throw InvalidInputError("kabsch: need matching point sets with >= 3 points");
    if (!weights.empty() && weights.size() != p.size())
        throw InvalidInputError("kabsch: weight count mismatch");

    const std::size_t n = p.size();
    double wsum = 0.0;
    Vec3 pbar = Vec3::Zero(), qbar = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        wsum += w;
        pbar += w * p[i];
        qbar += w * q[i];
    }
    if (wsum <= 0.0) throw InvalidInputError("kabsch: nonpositive total weight");
    pbar /= wsum;
    qbar /= wsum;

    Mat3 h = Mat3::Zero();
    Mat3 pcov = Mat3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        const Vec3 dp = p[i] - pbar;
        h += w * dp * (q[i] - qbar).transpose();
        pcov += w * dp * dp.transpose();
    }

    // Collinear source points leave the rotation about the line unobservable.
    Vec3 pev;
    Mat3 pevec;
    detail::eig_sym3(pcov, pev, pevec);
    if (pev[1] <= 1e-12 * std::max(pev[0], 1e-300))
        throw DegenerateError("kabsch: degenerate (collinear) point configuration");

    Svd3 svd = svd3(h);
    Vec3 d(1.0, 1.0, 1.0);
    if ((svd.v * svd.u.transpose()).determinant() < 0.0) d[2] = -1.0;

    RigidTransform out;
    out.rotation = svd.v * d.asDiagonal() * svd.u.transpose();
    out.translation = qbar - out.rotation * pbar;
    return out;
}

inline double kabsch_residual(std::span<const Vec3> p, std::span<const Vec3> q,
                              const RigidTransform& rt,
                              std::span<const double> weights = {}) {
    double acc = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        acc += w * (rt.apply(p[i]) - q[i]).squaredNorm();
        wsum += w;
    }
    return wsum > 0 ? acc / wsum : 0.0;
}

/// Nearest matrix with determinant one (Frobenius), via SVD and a Newton
/// solve of the Lagrange condition d_i (d_i - sigma_i) = kappa on the
/// singular values with d_1 d_2 d_3 = 1.
inline Mat3 project_det1(const Mat3& f) {
    if (!finite(f)) throw InvalidInputError("project_det1: non-finite input");
    const double det = f.determinant();
    if (det <= 0.0) throw NumericError("project_det1: inverted element (det <= 0)");

    Svd3 svd = svd3(f);
    const Vec3& s = svd.sigma;

    // The Lagrange stationarity is solved in log coordinates d = exp(w),
    // where the constraint is the linear plane sum(w) = 0. Damped Newton on
    // that plane keeps every iterate exactly feasible and descends the
    // objective, so it converges for any det(f) > 0.
    // Init at sigma scaled onto the constraint surface: exact for isotropic f.
    Vec3 w = s.array().log() - std::log(s[0] * s[1] * s[2]) / 3.0;

    Eigen::Matrix<double, 3, 2> basis; // orthonormal basis of the plane
    basis.col(0) = Vec3(1, -1, 0) / std::sqrt(2.0);
    basis.col(1) = Vec3(1, 1, -2) / std::sqrt(6.0);

    auto objective = [&s](const Vec3& w) { return (w.array().exp() - s.array()).matrix().squaredNorm(); };

    const double scale = 1.0 + s.squaredNorm();
    double fw = objective(w);
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
        const Vec3 e = w.array().exp();
        const Vec3 grad = 2.0 * (e - s).cwiseProduct(e);
        const Vec2 rg = basis.transpose() * grad;
        if (rg.norm() < 1e-12 * scale) {
            converged = true;
            break;
        }
        const Vec3 hdiag = 2.0 * e.cwiseProduct(2.0 * e - s);
        Eigen::Matrix2d rh = basis.transpose() * hdiag.asDiagonal() * basis;
        // Levenberg shift keeps the reduced Hessian positive definite.
        const double shift = std::max(0.0, 1e-8 - rh.eigenvalues().real().minCoeff());
        rh += (shift + 1e-14) * Eigen::Matrix2d::Identity();
        const Vec2 step = rh.ldlt().solve(rg);

        double alpha = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
            const Vec3 wn = w - alpha * (basis * step);
            const double fn = objective(wn);
            if (fn <= fw - 1e-4 * alpha * rg.dot(step)) {
                // descent stalls only at numerical stationarity
                if (fw - fn <= 1e-15 * (1.0 + fw) && rg.norm() < 1e-7 * scale) {
                    converged = true;
                } else {
                    moved = true;
                }
                w = wn;
                fw = fn;
                break;
            }
            alpha *= 0.5;
        }
        if (converged) break;
        if (!moved) {
            converged = rg.norm() < 1e-7 * scale;
            break;
        }
    }
    if (!converged) throw NumericError("project_det1: Newton did not converge in 50 iterations");
    const Vec3 d = w.array().exp();

    // det(u) det(v) = +1 here because det(f) > 0, so det(result) = prod(d) = 1.
    return svd.u * d.asDiagonal() * svd.v.transpose();
}

struct TrilinearBasis {
    std::array<double, 8> weights;
    std::array<Vec3, 8> gradients; // w.r.t. world coords, cell size h
};

/// Corner c carries bit 0 -> x, bit 1 -> y, bit 2 -> z of its offset.
inline TrilinearBasis trilinear_basis(const Vec3& local, double h) {
    for (int a = 0; a < 3; ++a) {
        if (!(local[a] >= -1e-9 && local[a] <= 1.0 + 1e-9) || !std::isfinite(local[a]))
            throw InvalidInputError("trilinear_basis: local coordinate outside [0,1]^3");
    }
    const Vec3 t(std::clamp(local[0], 0.0, 1.0), std::clamp(local[1], 0.0, 1.0),
                 std::clamp(local[2], 0.0, 1.0));
    TrilinearBasis out;
    for (int c = 0; c < 8; ++c) {
        double w = 1.0;
        Vec3 g(1.0, 1.0, 1.0);
        for (int a = 0; a < 3; ++a) {
            const bool hi = (c >> a) & 1;
            const double wa = hi ? t[a] : 1.0 - t[a];
            const double da = hi ? 1.0 : -1.0;
            w *= wa;
            for (int b = 0; b < 3; ++b) g[b] *= (b == a) ? da : wa;
        }
        out.weights[c] = w;
        out.gradients[c] = g / h;
    }
    return out;
}

} // namespace physface

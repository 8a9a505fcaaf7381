#pragma once

// Minimal interface for material-space -> deformed-space maps. Implemented
// by the trainable fields, the phantom ground-truth maps, and the closed-form
// test fields; losses, extraction and metrics consume this surface.

#include "physface/types.hpp"

#include <functional>

namespace physface {

struct DeformationMap {
    virtual ~DeformationMap() = default;
    virtual Vec3 eval(const Vec3& x) const = 0;
    virtual Mat3 jacobian(const Vec3& x) const = 0;
};

/// x -> m x + b, jacobian m everywhere.
struct AffineMap final : DeformationMap {
    Mat3 m = Mat3::Identity();
    Vec3 b = Vec3::Zero();

    AffineMap() = default;
    AffineMap(const Mat3& m_, const Vec3& b_) : m(m_), b(b_) {}

    Vec3 eval(const Vec3& x) const override { return m * x + b; }
    Mat3 jacobian(const Vec3&) const override { return m; }
};

struct IdentityMap final : DeformationMap {
    Vec3 eval(const Vec3& x) const override { return x; }
    Mat3 jacobian(const Vec3&) const override { return Mat3::Identity(); }
};

/// Wraps closures; Jacobian defaults to central differences when not given.
struct CallableMap final : DeformationMap {
    std::function<Vec3(const Vec3&)> f;
    std::function<Mat3(const Vec3&)> jf;

    Vec3 eval(const Vec3& x) const override { return f(x); }
    Mat3 jacobian(const Vec3& x) const override {
        if (jf) return jf(x);
        Mat3 j;
        const double h = 1e-5;
        for (int k = 0; k < 3; ++k) {
            Vec3 e = Vec3::Zero();
            e[k] = h;
            j.col(k) = (f(x + e) - f(x - e)) / (2 * h);
        }
        return j;
    }
};

} // namespace physface

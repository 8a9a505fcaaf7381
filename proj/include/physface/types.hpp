#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace physface {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Error taxonomy shared across modules. Each maps to one of the spec'd
// failure classes; message text carries the specifics.
struct InvalidInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TopologyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SetupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Rotation + translation, rotation in SO(3). Consumers that require the
/// invariants (orthonormality to 1e-9, det +1) validate via is_valid().
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    RigidTransform inverse() const {
        return {rotation.transpose(), -(rotation.transpose() * translation)};
    }

    /// Composition: (this ∘ other)(p) = this(other(p)).
    RigidTransform compose(const RigidTransform& other) const {
        return {rotation * other.rotation, rotation * other.translation + translation};
    }

    bool is_valid(double tol = 1e-9) const {
        return (rotation.transpose() * rotation - Mat3::Identity()).norm() <= tol * 10 &&
               std::abs(rotation.determinant() - 1.0) <= tol * 10;
    }

    static RigidTransform identity() { return {}; }
};

// Deterministic RNG. splitmix64 state advance, never std:: distributions,
// so sampled streams are bit-stable across library versions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed + 0x9E3779B97F4A7C15ull) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // 128-bit multiply rejection-free scaling (Lemire), bias < 2^-64.
        return std::uint64_t((__uint128_t(next_u64()) * n) >> 64);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0, u2 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    Vec3 normal3() {
        const double a = normal(), b = normal(), c = normal();
        return Vec3(a, b, c);
    }

    /// Independent child stream; distinct tags give distinct streams.
    Rng fork(std::uint64_t tag) const {
        Rng child(state_ ^ (0xA24BAED4963EE407ull * (tag + 1)));
        child.next_u64();
        return child;
    }

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline bool finite(const Vec3& v) { return v.allFinite(); }
inline bool finite(const Mat3& m) { return m.allFinite(); }

} // namespace physface

#include "physface/numerics.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

using namespace physface;

namespace {

Mat3 random_mat3(Rng& rng, double scale = 1.0) {
    Mat3 m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = scale * rng.normal();
    return m;
}

Mat3 rot_z(double a) {
    Mat3 r;
    r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return r;
}

Mat3 random_rotation(Rng& rng) {
    // uniform via normalized quaternion
    double q[4];
    double n = 0;
    for (double& c : q) {
        c = rng.normal();
        n += c * c;
    }
    n = std::sqrt(n);
    for (double& c : q) c /= n;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

} // namespace

TEST_CASE("svd3 identity and diagonal") {
    Svd3 s = svd3(Mat3::Identity());
    CHECK((s.u * s.sigma.asDiagonal() * s.v.transpose() - Mat3::Identity()).norm() < 1e-12);
    CHECK(s.sigma.isApprox(Vec3(1, 1, 1), 1e-12));

    Mat3 d = Vec3(3, 2, 1).asDiagonal();
    Svd3 sd = svd3(d);
    CHECK(sd.sigma.isApprox(Vec3(3, 2, 1), 1e-12));
    CHECK((sd.u * sd.sigma.asDiagonal() * sd.v.transpose() - d).norm() < 1e-10);
}

TEST_CASE("svd3 random reconstruction against eigensolver oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        Mat3 m = random_mat3(rng, trial % 7 == 0 ? 1e-3 : 1.0);
        Svd3 s = svd3(m);
        const double nm = m.norm();
        CHECK((s.u * s.sigma.asDiagonal() * s.v.transpose() - m).norm() < 1e-8 * nm);
        CHECK(s.sigma[0] >= s.sigma[1]);
        CHECK(s.sigma[1] >= s.sigma[2]);
        CHECK(s.sigma[2] >= 0.0);
        CHECK((s.u.transpose() * s.u - Mat3::Identity()).norm() < 1e-9);
        CHECK((s.v.transpose() * s.v - Mat3::Identity()).norm() < 1e-9);

        // oracle: eigenvalues of m^T m from Eigen's independent solver
        Eigen::SelfAdjointEigenSolver<Mat3> es(m.transpose() * m);
        Vec3 ev = es.eigenvalues().reverse();
        for (int i = 0; i < 3; ++i)
            CHECK(s.sigma[i] * s.sigma[i] == Catch::Approx(std::max(0.0, ev[i])).margin(1e-10 * nm * nm));
    }
}

TEST_CASE("svd3 rejects non-finite input") {
    Mat3 m = Mat3::Identity();
    m(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(svd3(m), InvalidInputError);
}

TEST_CASE("polar3 basics") {
    Polar3 pi = polar3(Mat3::Identity());
    CHECK((pi.r - Mat3::Identity()).norm() < 1e-12);
    CHECK((pi.s - Mat3::Identity()).norm() < 1e-12);

    Mat3 rz = rot_z(M_PI / 2);
    Polar3 pr = polar3(rz);
    CHECK((pr.r - rz).norm() < 1e-10);
    CHECK((pr.s - Mat3::Identity()).norm() < 1e-10);

    Mat3 d = Vec3(2, 0.5, 1).asDiagonal();
    Polar3 pd = polar3(d);
    CHECK((pd.r - Mat3::Identity()).norm() < 1e-10);
    CHECK((pd.s - d).norm() < 1e-10);
}

TEST_CASE("polar3 negative determinant against sampled-rotation oracle") {
    Rng rng(22);
    Mat3 f = random_mat3(rng);
    if (f.determinant() > 0) f.col(0) *= -1.0;
    REQUIRE(f.determinant() < 0);
    Polar3 p = polar3(f);
    CHECK(p.r.determinant() == Catch::Approx(1.0).margin(1e-9));

    const double opt = (p.r.transpose() * f).trace();
    double best = -1e300;
    Rng orng(23);
    for (int i = 0; i < 1000000; ++i) {
        best = std::max(best, (random_rotation(orng).transpose() * f).trace());
    }
    // brute force over 1e6 rotations cannot beat the closed form
    CHECK(opt >= best - 1e-9);
    CHECK(opt >= best - 1e-3 * std::abs(best)); // and should be near it
}

TEST_CASE("polar3 properties on random well-conditioned inputs") {
    Rng rng(33);
    int n = 0;
    for (int trial = 0; trial < 20000 && n < 10000; ++trial) {
        Mat3 f = random_mat3(rng);
        Svd3 s = svd3(f);
        if (s.sigma[2] < 0.05 * s.sigma[0]) continue; // well-conditioned only
        ++n;
        Polar3 p = polar3(f);
        REQUIRE((p.r.transpose() * p.r - Mat3::Identity()).norm() < 1e-9);
        REQUIRE((p.s - p.s.transpose()).norm() < 1e-8 * f.norm());
        REQUIRE((p.r * p.s - f).norm() < 1e-8 * f.norm());
        REQUIRE(p.r.determinant() == Catch::Approx(1.0).margin(1e-9));
    }
    CHECK(n == 10000);
}

TEST_CASE("polar3 degenerate inputs") {
    Mat3 rank1 = Vec3(1, 0, 0) * Vec3(1, 2, 3).transpose();
    CHECK_THROWS_AS(polar3(rank1), DegenerateError);
    CHECK_THROWS_AS(polar3(Mat3::Zero()), InvalidInputError);
}

TEST_CASE("kabsch exact recovery") {
    Rng rng(44);
    std::vector<Vec3> p;
    for (int i = 0; i < 12; ++i) p.push_back(rng.normal3() * 10.0);

    SECTION("identity") {
        RigidTransform rt = kabsch(p, p);
        CHECK((rt.rotation - Mat3::Identity()).norm() < 1e-12);
        CHECK(rt.translation.norm() < 1e-12);
    }
    SECTION("constructed rigid motion") {
        Mat3 r = rot_z(M_PI / 2);
        Vec3 t(1, 2, 3);
        std::vector<Vec3> q;
        for (const Vec3& x : p) q.push_back(r * x + t);
        RigidTransform rt = kabsch(p, q);
        CHECK((rt.rotation - r).norm() < 1e-10);
        CHECK((rt.translation - t).norm() < 1e-10);
        CHECK(kabsch_residual(p, q, rt) < 1e-10);
    }
}

TEST_CASE("kabsch noisy case against descent oracle") {
    Rng rng(55);
    std::vector<Vec3> p, q;
    Mat3 r = random_rotation(rng);
    Vec3 t(0.3, -1.1, 2.0);
    for (int i = 0; i < 20; ++i) {
        Vec3 x = rng.normal3() * 5.0;
        p.push_back(x);
        q.push_back(r * x + t + rng.normal3() * 0.1);
    }
    RigidTransform rt = kabsch(p, q);
    const double res = kabsch_residual(p, q, rt);

    // oracle: gradient descent over axis-angle + translation
    Vec3 aa = Vec3::Zero(), tr = Vec3::Zero();
    auto rot_of = [](const Vec3& w) -> Mat3 {
        const double a = w.norm();
        if (a < 1e-12) return Mat3::Identity();
        return Eigen::AngleAxisd(a, w / a).toRotationMatrix();
    };
    auto cost = [&](const Vec3& w, const Vec3& tt) {
        Mat3 rr = rot_of(w);
        double c = 0;
        for (std::size_t i = 0; i < p.size(); ++i) c += (rr * p[i] + tt - q[i]).squaredNorm();
        return c / double(p.size());
    };
    double step = 1e-2;
    double best = cost(aa, tr);
    for (int it = 0; it < 20000; ++it) {
        Vec3 ga = Vec3::Zero(), gt = Vec3::Zero();
        const double h = 1e-6;
        for (int k = 0; k < 3; ++k) {
            Vec3 e = Vec3::Zero();
            e[k] = h;
            ga[k] = (cost(aa + e, tr) - cost(aa - e, tr)) / (2 * h);
            gt[k] = (cost(aa, tr + e) - cost(aa, tr - e)) / (2 * h);
        }
        Vec3 naa = aa - step * ga, ntr = tr - step * gt;
        double c = cost(naa, ntr);
        if (c < best) {
            best = c;
            aa = naa;
            tr = ntr;
            step *= 1.1;
        } else {
            step *= 0.5;
            if (step < 1e-14) break;
        }
    }
    CHECK(res <= best + 1e-8);
}

TEST_CASE("kabsch residual invariant under common rigid motion") {
    Rng rng(66);
    std::vector<Vec3> p, q;
    for (int i = 0; i < 15; ++i) {
        p.push_back(rng.normal3() * 3.0);
        q.push_back(rng.normal3() * 3.0 + Vec3(0, 1, 0));
    }
    const double r0 = kabsch_residual(p, q, kabsch(p, q));
    Mat3 rr = random_rotation(rng);
    Vec3 tt(4, -2, 7);
    std::vector<Vec3> p2, q2;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p2.push_back(rr * p[i] + tt);
        q2.push_back(rr * q[i] + tt);
    }
    const double r1 = kabsch_residual(p2, q2, kabsch(p2, q2));
    CHECK(std::abs(r0 - r1) < 1e-10);
}

TEST_CASE("kabsch degenerate point sets") {
    std::vector<Vec3> line, img;
    for (int i = 0; i < 6; ++i) {
        line.push_back(Vec3(i, 2 * i, -i));
        img.push_back(Vec3(i + 1, 2 * i, -i));
    }
    CHECK_THROWS_AS(kabsch(line, img), DegenerateError);
    std::vector<Vec3> two = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    CHECK_THROWS_AS(kabsch(two, two), InvalidInputError);
}

TEST_CASE("project_det1 fixed points") {
    CHECK((project_det1(Mat3::Identity()) - Mat3::Identity()).norm() < 1e-12);
    Rng rng(77);
    Mat3 r = random_rotation(rng);
    CHECK((project_det1(r) - r).norm() < 1e-9);
}

TEST_CASE("project_det1 diag(2,1,1) against scalar brute-force oracle") {
    Mat3 f = Vec3(2, 1, 1).asDiagonal();
    Mat3 d = project_det1(f);
    CHECK(d.determinant() == Catch::Approx(1.0).margin(1e-8));

    // oracle: minimize (2-s)^2 + 2 (1-t)^2 with s t^2 = 1, scan + refine
    double best_s = 1.0, best_c = 1e300;
    for (int pass = 0; pass < 3; ++pass) {
        const double lo = pass == 0 ? 0.05 : best_s * 0.9;
        const double hi = pass == 0 ? 5.0 : best_s * 1.1;
        for (int i = 0; i <= 200000; ++i) {
            const double s = lo + (hi - lo) * i / 200000.0;
            const double t = 1.0 / std::sqrt(s);
            const double c = (2 - s) * (2 - s) + 2 * (1 - t) * (1 - t);
            if (c < best_c) {
                best_c = c;
                best_s = s;
            }
        }
    }
    CHECK(d(0, 0) == Catch::Approx(best_s).epsilon(1e-5));
    const double cost = (f - d).squaredNorm();
    CHECK(cost == Catch::Approx(best_c).epsilon(1e-6));
}

TEST_CASE("project_det1 KKT cofactor alignment") {
    Rng rng(88);
    int n = 0;
    while (n < 500) {
        Mat3 f = random_mat3(rng);
        const double det = f.determinant();
        if (det < 0.2 || det > 5.0) continue;
        ++n;
        Mat3 d = project_det1(f);
        REQUIRE(d.determinant() == Catch::Approx(1.0).margin(1e-8));
        // (f - d) = kappa * cofactor(d) for some scalar kappa
        Mat3 cof = d.determinant() * d.inverse().transpose();
        Mat3 diff = f - d;
        const double kappa = diff.cwiseProduct(cof).sum() / cof.squaredNorm();
        REQUIRE((diff - kappa * cof).norm() <= 1e-6 * (diff.norm() + 1e-12));
    }
}

TEST_CASE("project_det1 rejects inverted input") {
    Mat3 f = Vec3(1, 1, -1).asDiagonal();
    CHECK_THROWS_AS(project_det1(f), NumericError);
}

TEST_CASE("trilinear basis corners and center") {
    TrilinearBasis b0 = trilinear_basis(Vec3(0, 0, 0), 1.0);
    CHECK(b0.weights[0] == Catch::Approx(1.0));
    for (int c = 1; c < 8; ++c) CHECK(b0.weights[c] == Catch::Approx(0.0).margin(1e-15));

    TrilinearBasis bc = trilinear_basis(Vec3(0.5, 0.5, 0.5), 2.0);
    for (int c = 0; c < 8; ++c) CHECK(bc.weights[c] == Catch::Approx(0.125));
}

TEST_CASE("trilinear basis partition of unity and affine reproduction") {
    Rng rng(99);
    const double h = 1.7;
    Mat3 a = random_mat3(rng);
    Vec3 b = rng.normal3();
    for (int trial = 0; trial < 200; ++trial) {
        Vec3 local(rng.uniform(), rng.uniform(), rng.uniform());
        TrilinearBasis tb = trilinear_basis(local, h);
        double wsum = 0;
        Vec3 gsum = Vec3::Zero();
        Vec3 interp = Vec3::Zero();
        Mat3 grad = Mat3::Zero();
        for (int c = 0; c < 8; ++c) {
            wsum += tb.weights[c];
            gsum += tb.gradients[c];
            const Vec3 corner = h * Vec3((c >> 0) & 1, (c >> 1) & 1, (c >> 2) & 1);
            const Vec3 val = a * corner + b;
            interp += tb.weights[c] * val;
            grad += val * tb.gradients[c].transpose();
        }
        REQUIRE(wsum == Catch::Approx(1.0).margin(1e-13));
        REQUIRE(gsum.norm() < 1e-12 / h);
        REQUIRE((interp - (a * (h * local) + b)).norm() < 1e-12 * (1 + b.norm()));
        REQUIRE((grad - a).norm() < 1e-12 * (1 + a.norm()));
    }
}

TEST_CASE("trilinear basis rejects out-of-range coords") {
    CHECK_THROWS_AS(trilinear_basis(Vec3(1.5, 0, 0), 1.0), InvalidInputError);
    CHECK_THROWS_AS(trilinear_basis(Vec3(0, -0.1, 0), 1.0), InvalidInputError);
}

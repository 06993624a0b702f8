// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/rasterizer.hpp"
#include "hdrsplat/reference.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <omp.h>

#include <cmath>

using namespace hdrsplat;
using hdrsplat::testing::random_test_cloud;
using hdrsplat::testing::set_dc_color;
using hdrsplat::testing::test_camera;

namespace {

// One Gaussian at a fixed world point, axis-aligned, time-independent.
CloudT<double> single_gaussian(const Vec3T<double>& pos, double sigma, double alpha, const Vec3T<double>& color,
                               double mu_t = 0.5, double sigma_t = 10.0) {
    CloudT<double> c;
    c.resize(1);
    c.mean4.row(0) << pos[0], pos[1], pos[2], mu_t;
    c.log_scale4.row(0) << std::log(sigma), std::log(sigma), std::log(sigma), std::log(sigma_t);
    c.raw_opacity[0] = inverse_sigmoid(alpha);
    set_dc_color(c, 0, color);
    return c;
}

CameraT<double> axis_camera() {
    CameraT<double> cam;
    cam.rotation = Mat3T<double>::Identity();
    cam.translation.setZero();
    cam.fx = cam.fy = 100.0;
    cam.cx = cam.cy = 50.0;
    cam.width = cam.height = 100;
    return cam;
}

double loss_value(const ImageT<double>& img, const ImageT<double>& target) {
    double l = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double d = img.data[i] - target.data[i];
        l += 0.5 * d * d;
    }
    return l;
}

ImageT<double> loss_grad(const ImageT<double>& img, const ImageT<double>& target) {
    ImageT<double> g(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        g.data[i] = img.data[i] - target.data[i];
    return g;
}

} // namespace

TEST_CASE("projection places an on-axis point at the principal point") {
    auto cloud = single_gaussian({0, 0, 5}, 0.1, 0.5, {1, 0, 0});
    RenderOptionsT<double> opts;
    auto cache = prepare_splats(cloud, axis_camera(), 0.5, opts);
    REQUIRE(cache.splats.size() == 1);
    CHECK(cache.splats[0].mean2[0] == doctest::Approx(50.0));
    CHECK(cache.splats[0].mean2[1] == doctest::Approx(50.0));
    CHECK(cache.splats[0].depth == doctest::Approx(5.0));
}

TEST_CASE("projection of an isotropic covariance matches the analytic Jacobian") {
    const double sigma = 0.2;
    auto cloud = single_gaussian({0, 0, 5}, sigma, 0.5, {1, 0, 0});
    RenderOptionsT<double> opts;
    auto cache = prepare_splats(cloud, axis_camera(), 0.5, opts);
    REQUIRE(cache.splats.size() == 1);
    const double expect = std::pow(100.0 * sigma / 5.0, 2) + 0.3;
    CHECK(cache.splats[0].cov2(0, 0) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(cache.splats[0].cov2(1, 1) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(std::abs(cache.splats[0].cov2(0, 1)) < 1e-12);
}

TEST_CASE("points behind the near plane are culled") {
    auto cloud = single_gaussian({0, 0, -1}, 0.1, 0.5, {1, 0, 0});
    RenderOptionsT<double> opts;
    auto cache = prepare_splats(cloud, axis_camera(), 0.5, opts);
    CHECK(cache.splats.empty());
}

TEST_CASE("composite golden cases") {
    RenderOptionsT<double> opts;

    SUBCASE("single near-opaque splat at a pixel center") {
        auto cloud = single_gaussian({0, 0, 5}, 0.3, 0.9999999, {1.0, 0.25, 0.75});
        auto img = render_hdr(cloud, axis_camera(), 0.5, opts);
        const double* px = img.pixel(50, 50);
        CHECK(px[0] == doctest::Approx(0.99 * 1.0).epsilon(1e-6));
        CHECK(px[1] == doctest::Approx(0.99 * 0.25).epsilon(1e-6));
        CHECK(px[2] == doctest::Approx(0.99 * 0.75).epsilon(1e-6));
    }

    SUBCASE("two half-weight splats compose front to back") {
        CloudT<double> cloud;
        cloud.resize(2);
        cloud.mean4.row(0) << 0, 0, 4, 0.5;
        cloud.mean4.row(1) << 0, 0, 6, 0.5;
        for (int i = 0; i < 2; ++i) {
            cloud.log_scale4.row(i) << std::log(0.3), std::log(0.3), std::log(0.3), std::log(10.0);
            cloud.raw_opacity[i] = 0.0; // sigmoid -> 0.5 exactly
        }
        set_dc_color<double>(cloud, 0, {1.0, 0.0, 0.0});
        set_dc_color<double>(cloud, 1, {0.0, 1.0, 0.0});
        auto img = render_hdr(cloud, axis_camera(), 0.5, opts);
        const double* px = img.pixel(50, 50);
        CHECK(px[0] == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(px[1] == doctest::Approx(0.25).epsilon(1e-9));
        CHECK(px[2] == doctest::Approx(0.0));
    }

    SUBCASE("empty cloud renders the background") {
        CloudT<double> cloud;
        cloud.resize(0);
        opts.background = Vec3T<double>(0.1, 0.2, 0.3);
        auto img = render_hdr(cloud, axis_camera(), 0.5, opts);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                CHECK(img.pixel(x, y)[0] == doctest::Approx(0.1));
                CHECK(img.pixel(x, y)[2] == doctest::Approx(0.3));
            }
    }
}

TEST_CASE("all-zero SH renders mid gray scaled by coverage") {
    CloudT<double> cloud = random_test_cloud<double>(8, 61);
    cloud.sh.setZero(); // every color is exactly (0.5, 0.5, 0.5)
    CameraT<double> cam = test_camera<double>(12);

    RenderOptionsT<double> black;
    RenderOptionsT<double> white;
    white.background = Vec3T<double>::Ones();
    const auto on_black = render_hdr(cloud, cam, 0.5, black);
    const auto on_white = render_hdr(cloud, cam, 0.5, white);
    for (std::size_t i = 0; i < on_black.data.size(); ++i) {
        // I_black = 0.5 (1 - T) and I_white = I_black + T
        const double transmittance = on_white.data[i] - on_black.data[i];
        CHECK(on_black.data[i] == doctest::Approx(0.5 * (1.0 - transmittance)).epsilon(1e-9));
    }
}

TEST_CASE("depth order matters and the sort handles it") {
    CloudT<double> cloud;
    cloud.resize(2);
    // red in front of green, heavily overlapping
    cloud.mean4.row(0) << 0, 0, 4, 0.5;
    cloud.mean4.row(1) << 0, 0, 6, 0.5;
    for (int i = 0; i < 2; ++i) {
        cloud.log_scale4.row(i) << std::log(0.3), std::log(0.3), std::log(0.3), std::log(10.0);
        cloud.raw_opacity[i] = inverse_sigmoid(0.8);
    }
    set_dc_color<double>(cloud, 0, {1.0, 0.0, 0.0});
    set_dc_color<double>(cloud, 1, {0.0, 1.0, 0.0});
    RenderOptionsT<double> opts;
    auto front_red = render_hdr(cloud, axis_camera(), 0.5, opts);

    cloud.mean4(0, 2) = 6;
    cloud.mean4(1, 2) = 4;
    auto front_green = render_hdr(cloud, axis_camera(), 0.5, opts);

    const double* a = front_red.pixel(50, 50);
    const double* b = front_green.pixel(50, 50);
    CHECK(a[0] > a[1]);           // red dominates when red is in front
    CHECK(b[1] > b[0]);           // green dominates after the swap
    CHECK(std::abs(a[0] - b[0]) > 1e-3);
}

TEST_CASE("optimized renderer matches the brute-force reference") {
    RenderOptionsT<double> opts_d;
    double worst = 0.0;
    for (unsigned seed = 100; seed < 120; ++seed) {
        CloudT<double> cloud = random_test_cloud<double>(10, seed);
        CameraT<double> cam = test_camera<double>(16);
        const double t = 0.5;

        const ImageD oracle = reference_render(cloud, cam, t);

        CloudT<float> cloud_f = cloud.cast<float>();
        CameraT<float> cam_f = cam.cast<float>();
        RenderOptions opts_f;
        const Image fast = render_hdr(cloud_f, cam_f, 0.5f, opts_f);

        for (std::size_t i = 0; i < oracle.data.size(); ++i)
            worst = std::max(worst, std::abs(oracle.data[i] - static_cast<double>(fast.data[i])));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("transmittance telescopes as a product of survivals") {
    CloudT<double> cloud = random_test_cloud<double>(6, 42);
    CameraT<double> cam = test_camera<double>(8);
    RenderOptionsT<double> opts;
    opts.early_stop = 0.0;
    auto cache = prepare_splats(cloud, cam, 0.5, opts);
    REQUIRE(!cache.splats.empty());

    // rebuild the pixel sum with log-domain transmittance and compare
    const ImageT<double> img = composite<double>(cache, nullptr);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            Vec3T<double> acc = Vec3T<double>::Zero();
            double log_t = 0.0;
            for (int k : cache.rows[y]) {
                const auto& s = cache.splats[k];
                if (x < s.x0 || x > s.x1)
                    continue;
                const Vec2T<double> d(double(x) - s.mean2[0], double(y) - s.mean2[1]);
                const double w = std::min(s.w_time * std::exp(-0.5 * d.dot(s.cov2_inv * d)) * s.alpha, 0.99);
                acc += std::exp(log_t) * w * s.color;
                log_t += std::log1p(-w);
            }
            const double* px = img.pixel(x, y);
            for (int c = 0; c < 3; ++c)
                CHECK(std::abs(px[c] - acc[c]) <= 1e-10 * std::max(1.0, std::abs(acc[c])));
        }
}

TEST_CASE("early stop changes the image by less than 1e-3") {
    CloudT<double> cloud = random_test_cloud<double>(40, 77);
    for (int i = 0; i < cloud.count(); ++i)
        cloud.raw_opacity[i] = inverse_sigmoid(0.95); // force deep stacks
    CameraT<double> cam = test_camera<double>(16);
    RenderOptionsT<double> with_stop;
    with_stop.early_stop = 1e-4;
    RenderOptionsT<double> no_stop;
    no_stop.early_stop = 0.0;
    const auto a = render_hdr(cloud, cam, 0.5, with_stop);
    const auto b = render_hdr(cloud, cam, 0.5, no_stop);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    CHECK(worst < 1e-3);
}

TEST_CASE("forward and backward are bit-identical across thread counts") {
    CloudT<float> cloud = random_test_cloud<float>(20, 55);
    CameraT<float> cam = test_camera<float>(24);
    RenderOptions opts;

    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    auto cache1 = prepare_splats(cloud, cam, 0.5f, opts);
    const Image img1 = composite<float>(cache1, nullptr);
    ImageT<float> grad_seed(img1.width, img1.height, 0.25f);
    CloudGradsT<float> g1 = CloudGradsT<float>::zeros_like(cloud);
    render_hdr_backward(cache1, cloud, grad_seed, g1);

    omp_set_num_threads(2);
    auto cache2 = prepare_splats(cloud, cam, 0.5f, opts);
    const Image img2 = composite<float>(cache2, nullptr);
    CloudGradsT<float> g2 = CloudGradsT<float>::zeros_like(cloud);
    render_hdr_backward(cache2, cloud, grad_seed, g2);
    omp_set_num_threads(saved);

    CHECK(img1.data == img2.data);
    CHECK(g1.mean4 == g2.mean4);
    CHECK(g1.log_scale4 == g2.log_scale4);
    CHECK(g1.quat_left == g2.quat_left);
    CHECK(g1.quat_right == g2.quat_right);
    CHECK(g1.raw_opacity == g2.raw_opacity);
    CHECK(g1.sh == g2.sh);
}

TEST_CASE("zero image gradient produces zero parameter gradients") {
    CloudT<double> cloud = random_test_cloud<double>(5, 5);
    CameraT<double> cam = test_camera<double>(8);
    RenderOptionsT<double> opts;
    auto cache = prepare_splats(cloud, cam, 0.5, opts);
    ImageT<double> zero_grad(cam.width, cam.height);
    CloudGradsT<double> g = CloudGradsT<double>::zeros_like(cloud);
    render_hdr_backward(cache, cloud, zero_grad, g);
    CHECK(g.mean4.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.sh.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.raw_opacity.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward rejects a mismatched image gradient") {
    CloudT<double> cloud = random_test_cloud<double>(3, 9);
    CameraT<double> cam = test_camera<double>(8);
    RenderOptionsT<double> opts;
    auto cache = prepare_splats(cloud, cam, 0.5, opts);
    ImageT<double> wrong(4, 4);
    CloudGradsT<double> g = CloudGradsT<double>::zeros_like(cloud);
    CHECK_THROWS_AS(render_hdr_backward(cache, cloud, wrong, g), ContractViolation);
}

TEST_CASE("analytic gradients match central finite differences") {
    CloudT<double> cloud = random_test_cloud<double>(5, 321);
    CameraT<double> cam = test_camera<double>(8);
    RenderOptionsT<double> opts;
    opts.early_stop = 0.0;      // keep the finite-difference graph smooth
    opts.temporal_cull = 0.0;
    opts.spatial_tail = 1e-300;
    const double t = 0.5;

    // fixed target so the loss is a plain quadratic
    ImageT<double> target(cam.width, cam.height, 0.4);

    auto forward_loss = [&](const CloudT<double>& c) {
        return loss_value(render_hdr(c, cam, t, opts), target);
    };

    auto cache = prepare_splats(cloud, cam, t, opts);
    const ImageT<double> img = composite<double>(cache, nullptr);
    CloudGradsT<double> g = CloudGradsT<double>::zeros_like(cloud);
    render_hdr_backward(cache, cloud, loss_grad(img, target), g);

    const double h = 1e-4;
    double worst = 0.0;
    auto check_param = [&](double* p, double analytic) {
        const double orig = *p;
        *p = orig + h;
        const double up = forward_loss(cloud);
        *p = orig - h;
        const double down = forward_loss(cloud);
        *p = orig;
        const double fd = (up - down) / (2 * h);
        const double rel = std::abs(analytic - fd) / std::max({std::abs(fd), std::abs(analytic), 1e-6});
        worst = std::max(worst, rel);
    };

    for (int i = 0; i < cloud.count(); ++i) {
        for (int d = 0; d < 4; ++d) {
            check_param(&cloud.mean4(i, d), g.mean4(i, d));
            check_param(&cloud.log_scale4(i, d), g.log_scale4(i, d));
            check_param(&cloud.quat_left(i, d), g.quat_left(i, d));
            check_param(&cloud.quat_right(i, d), g.quat_right(i, d));
        }
        check_param(&cloud.raw_opacity(i), g.raw_opacity(i));
        for (int j = 0; j < cloud.sh_dim(); ++j)
            check_param(&cloud.sh(i, j), g.sh(i, j));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("opacity gradient pushes a dark pixel toward a bright target") {
    auto cloud = single_gaussian({0, 0, 5}, 0.4, 0.1, {1.5, 1.5, 1.5});
    CameraT<double> cam = axis_camera();
    RenderOptionsT<double> opts;
    auto cache = prepare_splats(cloud, cam, 0.5, opts);
    const ImageT<double> img = composite<double>(cache, nullptr);
    ImageT<double> target(cam.width, cam.height, 1.0); // bright everywhere
    CloudGradsT<double> g = CloudGradsT<double>::zeros_like(cloud);
    render_hdr_backward(cache, cloud, loss_grad(img, target), g);
    CHECK(g.raw_opacity[0] < 0.0); // increasing opacity decreases the loss
}

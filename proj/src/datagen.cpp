// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hdrsplat {

namespace {

struct Sphere {
    Vec3T<double> center;
    double radius;
};

std::optional<double> ray_sphere(const Vec3T<double>& origin, const Vec3T<double>& dir, const Sphere& s) {
    const Vec3T<double> oc = origin - s.center;
    const double b = oc.dot(dir);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0.0)
        return std::nullopt;
    const double sq = std::sqrt(disc);
    double t = -b - sq;
    if (t < 1e-6)
        t = -b + sq;
    if (t < 1e-6)
        return std::nullopt;
    return t;
}

Vec3T<double> emitter_center(double t) {
    // three-quarter orbit around the diffuse sphere, with a gentle vertical bob
    const double angle = 1.5 * M_PI * t;
    return {1.2 * std::cos(angle), 0.35 * std::sin(2.0 * M_PI * t), 1.2 * std::sin(angle)};
}

} // namespace

CameraT<double> scene_camera(const SceneSpec& spec, int q) {
    const double angle = 2.0 * M_PI * q / spec.cameras;
    const Vec3T<double> eye(3.5 * std::cos(angle), 0.9, 3.5 * std::sin(angle));
    const double f = spec.size * 1.1;
    return CameraT<double>::look_at(eye, Vec3T<double>::Zero(), Vec3T<double>(0, 1, 0), f, f, spec.size, spec.size);
}

ImageD render_hdr_gt(const SceneSpec& spec, const CameraT<double>& camera, double t) {
    spec.validate();
    const Sphere diffuse{Vec3T<double>::Zero(), 0.5};
    const Sphere emitter{emitter_center(t), 0.22};
    const Vec3T<double> emitter_color(spec.emitter_radiance, spec.emitter_radiance * 0.7,
                                      spec.emitter_radiance * 0.4);
    const Vec3T<double> albedo(0.5, 0.7, 1.0); // peak channel scales to diffuse_peak

    const Vec3T<double> origin = camera.center();
    const Mat3T<double> cam_to_world = camera.rotation.transpose();

    ImageD img(camera.width, camera.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const Vec3T<double> dir_cam((x - camera.cx) / camera.fx, (y - camera.cy) / camera.fy, 1.0);
            const Vec3T<double> dir = (cam_to_world * dir_cam).normalized();

            const auto hit_d = ray_sphere(origin, dir, diffuse);
            const auto hit_e = ray_sphere(origin, dir, emitter);

            Vec3T<double> radiance = Vec3T<double>::Zero();
            if (hit_e && (!hit_d || *hit_e < *hit_d)) {
                radiance = emitter_color; // emitters are unshaded
            } else if (hit_d) {
                const Vec3T<double> p = origin + dir * *hit_d;
                const Vec3T<double> n = (p - diffuse.center).normalized();
                const Vec3T<double> l = (emitter.center - p).normalized();
                const double lambert = std::max(0.0, n.dot(l));
                radiance = albedo * (spec.diffuse_peak * lambert);
            }
            double* px = img.pixel(x, y);
            px[0] = radiance[0];
            px[1] = radiance[1];
            px[2] = radiance[2];
        }
    }
    return img;
}

ImageU8 apply_crf(const ImageD& hdr, double exposure, double gamma) {
    if (!(exposure > 0.0))
        throw InvalidExposure("exposure time must be positive");
    ImageU8 out(hdr.width, hdr.height);
    const double inv_gamma = 1.0 / gamma;
    for (std::size_t i = 0; i < hdr.data.size(); ++i) {
        const double e = hdr.data[i] * exposure;
        const double v = std::clamp(std::pow(std::max(e, 0.0), inv_gamma), 0.0, 1.0);
        out.data[i] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
    return out;
}

Manifest write_dataset(const SceneSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "ldr", ec);
    std::filesystem::create_directories(out_dir / "hdr", ec);
    if (!std::filesystem::exists(out_dir / "ldr"))
        throw IoError("cannot create dataset directory: " + out_dir.string());

    Manifest manifest;
    manifest.base_dir = out_dir;
    const int p_count = static_cast<int>(spec.exposures.size());

    for (int ti = 0; ti < spec.timesteps; ++ti) {
        const double t = static_cast<double>(ti) / (spec.timesteps - 1);
        const std::string split = (ti % 5 == 4) ? "test" : "train";
        for (int q = 0; q < spec.cameras; ++q) {
            const CameraT<double> cam = scene_camera(spec, q);
            const ImageD hdr = render_hdr_gt(spec, cam, t);

            char buf[96];
            if (spec.with_hdr) {
                std::snprintf(buf, sizeof(buf), "hdr/t%03d_c%02d.pfm", ti, q);
                write_pfm(out_dir / buf, hdr.cast<float>());
                FrameRecord rec;
                rec.hdr_path = buf;
                rec.time = t;
                rec.camera_id = q;
                rec.camera = cam.cast<float>();
                rec.split = split;
                manifest.frames.push_back(std::move(rec));
            }

            const int first = spec.pattern == "stereo" ? 0 : (ti + q) % p_count;
            const int count = spec.pattern == "stereo" ? p_count : 1;
            for (int pi = 0; pi < count; ++pi) {
                const int p = (first + pi) % p_count;
                const double exposure = spec.exposures[p];
                std::snprintf(buf, sizeof(buf), "ldr/t%03d_c%02d_e%d.png", ti, q, p);
                write_png(out_dir / buf, apply_crf(hdr, exposure, spec.crf_gamma));
                FrameRecord rec;
                rec.ldr_path = buf;
                rec.time = t;
                rec.exposure = exposure;
                rec.camera_id = q;
                rec.camera = cam.cast<float>();
                rec.split = split;
                manifest.frames.push_back(std::move(rec));
            }
        }
    }

    manifest.save(out_dir / "manifest.json");
    return manifest;
}

} // namespace hdrsplat

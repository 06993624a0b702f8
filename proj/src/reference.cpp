// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace hdrsplat {

ImageD reference_render(const CloudT<double>& cloud, const CameraT<double>& camera, double t,
                        const Vec3T<double>& background, double dilation, double alpha_clamp, double near_plane) {
    struct Entry {
        double w_time;
        double alpha;
        Vec2T<double> mean2;
        Mat2T<double> cov2_inv;
        double det;
        Vec3T<double> color;
        double depth;
    };

    std::vector<Entry> entries;
    const Vec3T<double> cam_center = camera.center();

    for (int i = 0; i < cloud.count(); ++i) {
        const Vec4T<double> mean4 = cloud.mean4.row(i).transpose();
        const Mat4T<double> cov4 = build_covariance4<double>(cloud.log_scale4.row(i).transpose(),
                                                             cloud.quat_left.row(i).transpose(),
                                                             cloud.quat_right.row(i).transpose());
        Entry e;
        e.w_time = temporal_weight(cov4, mean4[3], t);

        Vec3T<double> mean3;
        Mat3T<double> cov3;
        conditional_spatial(cov4, mean4, t, mean3, cov3);

        const Vec3T<double> p_cam = camera.rotation * mean3 + camera.translation;
        if (!(p_cam[2] > near_plane))
            continue;
        e.depth = p_cam[2];
        e.mean2[0] = camera.fx * p_cam[0] / p_cam[2] + camera.cx;
        e.mean2[1] = camera.fy * p_cam[1] / p_cam[2] + camera.cy;

        Eigen::Matrix<double, 2, 3> J;
        J << camera.fx / p_cam[2], 0.0, -camera.fx * p_cam[0] / (p_cam[2] * p_cam[2]),
            0.0, camera.fy / p_cam[2], -camera.fy * p_cam[1] / (p_cam[2] * p_cam[2]);
        Mat2T<double> cov2 = J * (camera.rotation * cov3 * camera.rotation.transpose()) * J.transpose();
        cov2(0, 0) += dilation;
        cov2(1, 1) += dilation;
        e.det = cov2.determinant();
        if (e.det < 1e-12)
            continue; // singular splat is skipped, matching the contract
        e.cov2_inv = cov2.inverse();

        e.alpha = sigmoid(static_cast<double>(cloud.raw_opacity[i]));
        const Vec3T<double> dir = (mean3 - cam_center).normalized();
        e.color = eval_color_sh4d(cloud, i, dir, t);
        entries.push_back(e);
    }

    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.depth < b.depth; });

    ImageD img(camera.width, camera.height);
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            Vec3T<double> acc = Vec3T<double>::Zero();
            double trans = 1.0;
            for (const Entry& e : entries) {
                const Vec2T<double> d(double(x) - e.mean2[0], double(y) - e.mean2[1]);
                const double q = d.dot(e.cov2_inv * d);
                const double w = std::min(e.w_time * std::exp(-0.5 * q) * e.alpha, alpha_clamp);
                acc += trans * w * e.color;
                trans *= 1.0 - w;
            }
            acc += trans * background;
            double* px = img.pixel(x, y);
            px[0] = acc[0];
            px[1] = acc[1];
            px[2] = acc[2];
        }
    }
    return img;
}

} // namespace hdrsplat

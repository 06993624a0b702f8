// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/gradcheck.hpp"

#include "hdrsplat/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

namespace hdrsplat {

namespace {

struct Setup {
    CloudT<double> cloud;
    ToneMapperStateT<double> tone;
    CameraT<double> camera;
    RenderOptionsT<double> opts;
    double time = 0.5;
    int t_index = 5;
    double exposure = 2.0;
    ImageT<double> target_3d, target_2d, target_hdr;
};

Setup make_setup(const GradCheckOptions& opt) {
    Setup s;
    std::mt19937 rng(opt.seed);

    CloudInitOptions init;
    init.extent = 1.0f;
    init.scale_min = 0.2f;
    init.scale_max = 0.6f;
    init.time_scale_min = 0.4f;
    init.time_scale_max = 0.9f;
    init.quat_jitter = 0.2f;
    init.sh_dc_std = 0.5f;
    init.opacity = 0.5f;
    s.cloud = make_random_cloud<double>(opt.n_gaussians, rng, opt.sh_degree, opt.fourier_degree, init);
    std::normal_distribution<double> hi(0.0, 0.1);
    for (int i = 0; i < s.cloud.count(); ++i) {
        s.cloud.mean4(i, 3) = 0.3 + 0.4 * i / std::max(1, s.cloud.count() - 1);
        for (int j = 3; j < s.cloud.sh_dim(); ++j)
            s.cloud.sh(i, j) = hi(rng);
    }

    s.tone.window_k = opt.window_k;
    s.tone.curves.context_dim = opt.context_dim;
    s.tone.curves.hidden = opt.tone_hidden;
    s.tone.curves.init(rng);
    s.tone.drcl.kind = cell_kind_from_string(opt.cell);
    s.tone.drcl.context_dim = opt.context_dim;
    s.tone.drcl.init(rng);
    s.tone.bank.resize(12);
    std::uniform_real_distribution<double> bank(0.2, 1.5);
    for (int i = 0; i < 12; ++i)
        s.tone.bank.update(i, {bank(rng), bank(rng), bank(rng)});

    s.camera = CameraT<double>::look_at(Vec3T<double>(0, 0, -5), Vec3T<double>::Zero(), Vec3T<double>(0, 1, 0),
                                        opt.image_size * 1.4, opt.image_size * 1.4, opt.image_size, opt.image_size);

    // keep the finite-difference surface smooth: no discrete culls, no early stop
    s.opts.early_stop = 0.0;
    s.opts.temporal_cull = 0.0;
    s.opts.spatial_tail = 1e-300;

    s.target_3d = ImageT<double>(opt.image_size, opt.image_size, 0.35);
    s.target_2d = ImageT<double>(opt.image_size, opt.image_size, 0.45);
    s.target_hdr = ImageT<double>(opt.image_size, opt.image_size, 0.8);
    return s;
}

double quadratic(const ImageT<double>& img, const ImageT<double>& target, ImageT<double>* grad) {
    double l = 0.0;
    if (grad)
        *grad = ImageT<double>(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double d = img.data[i] - target.data[i];
        l += 0.5 * d * d;
        if (grad)
            grad->data[i] = d;
    }
    return l;
}

double forward_loss(const Setup& s) {
    PipelineForwardT<double> fwd = pipeline_forward<double>(s.cloud, s.tone, s.camera, s.time, s.t_index, s.exposure,
                                                            s.opts, true, true);
    return quadratic(fwd.ldr3d, s.target_3d, nullptr) + quadratic(fwd.ldr2d, s.target_2d, nullptr) +
           quadratic(fwd.hdr, s.target_hdr, nullptr);
}

} // namespace

void GradCheckReport::print(std::ostream& os) const {
    char line[128];
    for (const Group& g : groups) {
        std::snprintf(line, sizeof(line), "%-12s  params %5d  max rel err %.3e  %s\n", g.name.c_str(), g.count,
                      g.max_rel_err, g.max_rel_err < tolerance ? "ok" : "FAIL");
        os << line;
    }
    std::snprintf(line, sizeof(line), "tolerance %.1e, %.2fs\n", tolerance, seconds);
    os << line;
}

GradCheckReport run_gradcheck(const GradCheckOptions& opt) {
    const auto start = std::chrono::steady_clock::now();
    Setup s = make_setup(opt);

    PipelineForwardT<double> fwd =
        pipeline_forward<double>(s.cloud, s.tone, s.camera, s.time, s.t_index, s.exposure, s.opts, true, true);
    ImageT<double> g3d, g2d, ghdr;
    quadratic(fwd.ldr3d, s.target_3d, &g3d);
    quadratic(fwd.ldr2d, s.target_2d, &g2d);
    quadratic(fwd.hdr, s.target_hdr, &ghdr);
    PipelineGradsT<double> grads;
    pipeline_backward<double>(fwd, s.cloud, s.tone, g3d, &g2d, &ghdr, grads);

    const double h = opt.fd_step;
    GradCheckReport report;
    report.tolerance = opt.tolerance;

    auto check_group = [&](const std::string& name, auto&& for_each_param) {
        const double flip = name == opt.inject_wrong_sign ? -1.0 : 1.0;
        GradCheckReport::Group g;
        g.name = name;
        for_each_param([&](double* p, double analytic) {
            const double orig = *p;
            *p = orig + h;
            const double up = forward_loss(s);
            *p = orig - h;
            const double down = forward_loss(s);
            *p = orig;
            const double fd = (up - down) / (2.0 * h);
            const double a = flip * analytic;
            const double rel = std::abs(a - fd) / std::max({std::abs(fd), std::abs(a), 1e-6});
            g.max_rel_err = std::max(g.max_rel_err, rel);
            ++g.count;
        });
        report.groups.push_back(g);
    };

    check_group("position", [&](auto&& f) {
        for (int i = 0; i < s.cloud.count(); ++i)
            for (int d = 0; d < 4; ++d)
                f(&s.cloud.mean4(i, d), grads.cloud.mean4(i, d));
    });
    check_group("scaling", [&](auto&& f) {
        for (int i = 0; i < s.cloud.count(); ++i)
            for (int d = 0; d < 4; ++d)
                f(&s.cloud.log_scale4(i, d), grads.cloud.log_scale4(i, d));
    });
    check_group("rotation", [&](auto&& f) {
        for (int i = 0; i < s.cloud.count(); ++i)
            for (int d = 0; d < 4; ++d) {
                f(&s.cloud.quat_left(i, d), grads.cloud.quat_left(i, d));
                f(&s.cloud.quat_right(i, d), grads.cloud.quat_right(i, d));
            }
    });
    check_group("opacity", [&](auto&& f) {
        for (int i = 0; i < s.cloud.count(); ++i)
            f(&s.cloud.raw_opacity(i), grads.cloud.raw_opacity(i));
    });
    check_group("sh", [&](auto&& f) {
        for (int i = 0; i < s.cloud.count(); ++i)
            for (int j = 0; j < s.cloud.sh_dim(); ++j)
                f(&s.cloud.sh(i, j), grads.cloud.sh(i, j));
    });
    check_group("tone_curves", [&](auto&& f) {
        for (int c = 0; c < 3; ++c) {
            auto& pch = s.tone.curves.channels[c];
            auto& gch = grads.tone.curves.channels[c];
            Eigen::MatrixXd* ps[] = {&pch.w1, &pch.b1, &pch.w2, &pch.b2, &pch.w3, &pch.b3};
            Eigen::MatrixXd* gs[] = {&gch.w1, &gch.b1, &gch.w2, &gch.b2, &gch.w3, &gch.b3};
            for (int m = 0; m < 6; ++m)
                for (Eigen::Index i = 0; i < ps[m]->size(); ++i)
                    f(ps[m]->data() + i, gs[m]->data()[i]);
        }
    });
    check_group("drcl", [&](auto&& f) {
        auto& p = s.tone.drcl;
        auto& g = grads.tone.drcl;
        std::vector<std::pair<Eigen::MatrixXd*, Eigen::MatrixXd*>> mats;
        if (p.kind == CellKind::kGru) {
            mats = {{&p.wz, &g.wz}, {&p.uz, &g.uz}, {&p.bz, &g.bz},
                    {&p.wr, &g.wr}, {&p.ur, &g.ur}, {&p.br, &g.br},
                    {&p.wh, &g.wh}, {&p.uh, &g.uh}, {&p.bh, &g.bh}};
        } else {
            mats = {{&p.wh, &g.wh}, {&p.uh, &g.uh}, {&p.bh, &g.bh}};
        }
        for (auto& [pm, gm] : mats)
            for (Eigen::Index i = 0; i < pm->size(); ++i)
                f(pm->data() + i, gm->data()[i]);
    });

    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace hdrsplat

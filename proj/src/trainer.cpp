// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/trainer.hpp"

#include "hdrsplat/adam.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

namespace hdrsplat {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct TrainFrame {
    const FrameRecord* record;
    Image ldr;
    int t_index;
    const FrameRecord* hdr_record; // same (camera, time), may be null
};

int exact_time_index(const std::vector<double>& times, double t) {
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end() || *it != t)
        throw ManifestError("frame time missing from the timestamp table");
    return static_cast<int>(it - times.begin());
}

/// Named float spans driving the per-group optimizer and the gradient checks.
struct ParamView {
    std::string group;
    float* params;
    const float* grads;
    std::size_t size;
};

std::vector<ParamView> parameter_views(Cloud& cloud, ToneMapperState& tone, CloudGrads& gc, ToneMapperState& gt) {
    std::vector<ParamView> views;
    views.push_back({"position", cloud.mean4.data(), gc.mean4.data(), static_cast<std::size_t>(cloud.mean4.size())});
    views.push_back(
        {"scaling", cloud.log_scale4.data(), gc.log_scale4.data(), static_cast<std::size_t>(cloud.log_scale4.size())});
    views.push_back({"rotation_left", cloud.quat_left.data(), gc.quat_left.data(),
                     static_cast<std::size_t>(cloud.quat_left.size())});
    views.push_back({"rotation_right", cloud.quat_right.data(), gc.quat_right.data(),
                     static_cast<std::size_t>(cloud.quat_right.size())});
    views.push_back({"opacity", cloud.raw_opacity.data(), gc.raw_opacity.data(),
                     static_cast<std::size_t>(cloud.raw_opacity.size())});
    views.push_back({"sh", cloud.sh.data(), gc.sh.data(), static_cast<std::size_t>(cloud.sh.size())});

    std::map<std::string, float*> grad_by_name;
    gt.for_each_param([&](const std::string& name, Eigen::MatrixXf& m) { grad_by_name[name] = m.data(); });
    tone.for_each_param([&](const std::string& name, Eigen::MatrixXf& m) {
        views.push_back({name, m.data(), grad_by_name.at(name), static_cast<std::size_t>(m.size())});
    });
    return views;
}

double group_lr(const std::string& group, const TrainConfig& cfg, int iter) {
    if (group == "position") {
        const double frac = cfg.iterations > 1 ? static_cast<double>(iter) / cfg.iterations : 1.0;
        return cfg.lr_position * std::pow(cfg.lr_position_final / cfg.lr_position, frac);
    }
    if (group == "scaling")
        return cfg.lr_scaling;
    if (group == "rotation_left" || group == "rotation_right")
        return cfg.lr_rotation;
    if (group == "opacity")
        return cfg.lr_opacity;
    if (group == "sh")
        return cfg.lr_sh;
    return cfg.lr_tone; // tone curves and the context cell
}

} // namespace

int nearest_time_index(const std::vector<double>& timestamps, double t) {
    if (timestamps.empty())
        throw ContractViolation("empty timestamp table");
    const auto it = std::lower_bound(timestamps.begin(), timestamps.end(), t);
    if (it == timestamps.begin())
        return 0;
    if (it == timestamps.end())
        return static_cast<int>(timestamps.size()) - 1;
    const auto prev = it - 1;
    return (t - *prev) <= (*it - t) ? static_cast<int>(prev - timestamps.begin())
                                    : static_cast<int>(it - timestamps.begin());
}

TrainResult train(const Manifest& manifest, const TrainConfig& cfg) {
    cfg.validate();
    const auto start = Clock::now();
    std::filesystem::create_directories(cfg.out_dir);

    const std::vector<double> timestamps = manifest.unique_times();

    // index HDR ground truth by (camera, time index)
    std::map<std::pair<int, int>, const FrameRecord*> hdr_records;
    for (const FrameRecord& f : manifest.frames)
        if (f.is_hdr())
            hdr_records[{f.camera_id, exact_time_index(timestamps, f.time)}] = &f;

    const bool use_hdr = cfg.alpha > 0.0;
    std::vector<TrainFrame> frames;
    for (const FrameRecord& f : manifest.frames) {
        if (!f.is_ldr() || f.split != "train")
            continue;
        TrainFrame tf;
        tf.record = &f;
        tf.ldr = read_png(manifest.resolve(f.ldr_path));
        tf.t_index = exact_time_index(timestamps, f.time);
        const auto it = hdr_records.find({f.camera_id, tf.t_index});
        tf.hdr_record = it == hdr_records.end() ? nullptr : it->second;
        frames.push_back(std::move(tf));
    }
    if (frames.empty())
        throw ManifestError("no training frames in the manifest");

    // HDR ground truth is only ever read under HDR supervision
    std::map<const FrameRecord*, Image> hdr_images;
    if (use_hdr) {
        for (const TrainFrame& tf : frames)
            if (tf.hdr_record && !hdr_images.count(tf.hdr_record))
                hdr_images[tf.hdr_record] = read_pfm(manifest.resolve(tf.hdr_record->hdr_path));
    }

    std::mt19937 rng(static_cast<std::uint32_t>(cfg.seed));
    Cloud cloud;
    {
        CloudInitOptions init;
        init.extent = static_cast<float>(cfg.scene_extent);
        cloud = make_random_cloud<float>(cfg.n_init, rng, cfg.sh_degree, cfg.fourier_degree, init);
    }
    ToneMapperState tone;
    tone.window_k = cfg.window_k;
    tone.curves.context_dim = cfg.context_dim;
    tone.curves.hidden = cfg.tone_hidden;
    tone.curves.init(rng);
    tone.drcl.kind = cell_kind_from_string(cfg.cell);
    tone.drcl.context_dim = cfg.context_dim;
    tone.drcl.init(rng);
    tone.bank.resize(static_cast<int>(timestamps.size()));

    // warm-up epoch: one signature per discrete timestamp
    for (std::size_t i = 0; i < timestamps.size(); ++i)
        tone.bank.update(static_cast<int>(i), radiance_signature(cloud, static_cast<float>(timestamps[i])));

    LossWeights weights;
    weights.lambda = cfg.lambda;
    weights.alpha = cfg.alpha;
    weights.mu = cfg.mu;

    RenderOptions opts;
    AdamParams adam_params{cfg.beta1, cfg.beta2, cfg.adam_eps};
    std::map<std::string, AdamState> adam;
    std::int64_t skip_count = 0;

    const std::filesystem::path log_path = std::filesystem::path(cfg.out_dir) / "train_log.csv";
    std::ofstream log(log_path);
    log << "iter,loss_total,loss_ldr,loss_hdr,psnr_train\n";

    std::uniform_int_distribution<std::size_t> pick(0, frames.size() - 1);
    double last_loss = 0.0;

    auto save_checkpoint = [&](std::int64_t iter, const std::filesystem::path& path) {
        Checkpoint ck;
        ck.iteration = iter;
        ck.seed = cfg.seed;
        ck.config_hash = cfg.hash();
        ck.config_text = cfg.serialize();
        ck.skip_count = skip_count;
        ck.cloud = cloud;
        ck.tone = tone;
        ck.timestamps = timestamps;
        ck.adam = adam;
        ck.save(path);
        return ck;
    };

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        const TrainFrame& tf = frames[pick(rng)];
        const FrameRecord& rec = *tf.record;
        const float t = static_cast<float>(rec.time);
        const float exposure = static_cast<float>(rec.exposure);

        tone.bank.update(tf.t_index, radiance_signature(cloud, t));

        const bool frame_hdr = use_hdr && tf.hdr_record != nullptr;
        PipelineForwardT<float> fwd =
            pipeline_forward<float>(cloud, tone, rec.camera.cast<float>(), t, tf.t_index, exposure, opts,
                                    cfg.pixel_level, frame_hdr);

        const Image* hdr_gt = frame_hdr ? &hdr_images.at(tf.hdr_record) : nullptr;
        const Image* hdr_pred = frame_hdr ? &fwd.hdr : nullptr;
        const Image* ldr2d = fwd.has_2d ? &fwd.ldr2d : nullptr;
        TotalLossResult<float> loss = total_loss<float>(ldr2d, fwd.ldr3d, tf.ldr, hdr_pred, hdr_gt, weights);
        last_loss = loss.total;

        PipelineGradsT<float> grads;
        pipeline_backward<float>(fwd, cloud, tone, loss.grad_ldr_3d,
                                 loss.grad_ldr_2d ? &*loss.grad_ldr_2d : nullptr,
                                 loss.grad_hdr_2d ? &*loss.grad_hdr_2d : nullptr, grads);

        auto views = parameter_views(cloud, tone, grads.cloud, grads.tone);
        bool finite = true;
        for (const ParamView& v : views)
            for (std::size_t i = 0; i < v.size && finite; ++i)
                finite = std::isfinite(v.grads[i]);
        if (!finite) {
            ++skip_count;
        } else {
            for (ParamView& v : views)
                adam_step({v.params, v.size}, {v.grads, v.size}, adam[v.group], group_lr(v.group, cfg, iter),
                          adam_params);
        }

        if (iter % cfg.log_every == 0 || iter == cfg.iterations) {
            const float train_psnr = psnr_capped(fwd.ldr3d, tf.ldr);
            log << iter << "," << loss.total << "," << loss.ldr << "," << loss.hdr << "," << train_psnr << "\n";
            log.flush();
        }
        if (cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0 && iter != cfg.iterations) {
            char name[48];
            std::snprintf(name, sizeof(name), "checkpoint_%06d.ckpt", iter);
            save_checkpoint(iter, std::filesystem::path(cfg.out_dir) / name);
        }
    }

    TrainResult res;
    res.checkpoint_path = std::filesystem::path(cfg.out_dir) / "checkpoint_final.ckpt";
    res.checkpoint = save_checkpoint(cfg.iterations, res.checkpoint_path);
    res.log_path = log_path;
    res.seconds = seconds_since(start);
    res.final_loss = last_loss;
    return res;
}

EvalResult evaluate(const Checkpoint& ck, const Manifest& manifest, const std::string& split, double mu) {
    EvalResult out;
    RenderOptions opts;
    double render_seconds = 0.0;
    int renders = 0;

    double sum_ldr_psnr = 0.0, sum_ldr_ssim = 0.0, sum_hdr_psnr = 0.0, sum_hdr_ssim = 0.0;

    for (const FrameRecord& f : manifest.frames) {
        if (f.split != split)
            continue;
        const int t_index = nearest_time_index(ck.timestamps, f.time);
        const CameraT<float> cam = f.camera.cast<float>();
        if (f.is_ldr()) {
            const Image gt = read_png(manifest.resolve(f.ldr_path));
            const auto t0 = Clock::now();
            const Image pred = render_ldr3d<float>(ck.cloud, ck.tone, cam, static_cast<float>(f.time), t_index,
                                                   static_cast<float>(f.exposure), opts);
            render_seconds += seconds_since(t0);
            ++renders;
            EvalRow row;
            row.frame = f.ldr_path;
            row.domain = "ldr";
            row.psnr = psnr_capped(pred, gt);
            row.ssim = ssim(pred, gt);
            sum_ldr_psnr += row.psnr;
            sum_ldr_ssim += row.ssim;
            ++out.ldr_frames;
            out.rows.push_back(std::move(row));
        }
        if (f.is_hdr()) {
            const Image gt = read_pfm(manifest.resolve(f.hdr_path));
            const auto t0 = Clock::now();
            const Image pred = render_hdr<float>(ck.cloud, cam, static_cast<float>(f.time), opts);
            render_seconds += seconds_since(t0);
            ++renders;
            const Image pred_mu = mu_law(pred, static_cast<float>(mu));
            const Image gt_mu = mu_law(gt, static_cast<float>(mu));
            EvalRow row;
            row.frame = f.hdr_path;
            row.domain = "hdr_mu";
            row.psnr = psnr_capped(pred_mu, gt_mu);
            row.ssim = ssim(pred_mu, gt_mu);
            sum_hdr_psnr += row.psnr;
            sum_hdr_ssim += row.ssim;
            ++out.hdr_frames;
            out.rows.push_back(std::move(row));
        }
    }

    if (out.ldr_frames > 0) {
        out.mean_ldr_psnr = sum_ldr_psnr / out.ldr_frames;
        out.mean_ldr_ssim = sum_ldr_ssim / out.ldr_frames;
    }
    if (out.hdr_frames > 0) {
        out.mean_hdr_psnr = sum_hdr_psnr / out.hdr_frames;
        out.mean_hdr_ssim = sum_hdr_ssim / out.hdr_frames;
    }
    out.fps = render_seconds > 0.0 ? renders / render_seconds : 0.0;
    return out;
}

void EvalResult::write_csv(const std::filesystem::path& path, const std::string& scene) const {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write metrics: " + path.string());
    out << "scene,frame,domain,psnr,ssim\n";
    for (const EvalRow& r : rows)
        out << scene << "," << r.frame << "," << r.domain << "," << r.psnr << "," << r.ssim << "\n";
    out << scene << ",mean,ldr," << mean_ldr_psnr << "," << mean_ldr_ssim << "\n";
    out << scene << ",mean,hdr_mu," << mean_hdr_psnr << "," << mean_hdr_ssim << "\n";
}

std::vector<AblateRow> ablate(const Manifest& manifest, const TrainConfig& base, const std::string& axis) {
    struct Variant {
        std::string name;
        TrainConfig cfg;
    };
    std::vector<Variant> variants;
    if (axis == "cell_kind") {
        for (const std::string cell : {"gru", "rnn"}) {
            TrainConfig c = base;
            c.cell = cell;
            variants.push_back({cell, c});
        }
    } else if (axis == "k") {
        for (int k : {5, 10, 20, 30}) {
            TrainConfig c = base;
            c.window_k = k;
            variants.push_back({"k" + std::to_string(k), c});
        }
    } else if (axis == "pixel_level") {
        for (bool on : {true, false}) {
            TrainConfig c = base;
            c.pixel_level = on;
            variants.push_back({on ? "on" : "off", c});
        }
    } else if (axis == "supervision") {
        TrainConfig ldr_only = base;
        ldr_only.alpha = 0.0;
        variants.push_back({"ldr", ldr_only});
        TrainConfig with_hdr = base;
        with_hdr.alpha = with_hdr.alpha > 0.0 ? with_hdr.alpha : 0.6;
        variants.push_back({"ldr_hdr", with_hdr});
    } else {
        throw ContractViolation("unknown ablation axis: " + axis);
    }

    const std::uint64_t dataset_hash = manifest.dataset_hash();
    std::vector<AblateRow> rows;
    for (Variant& v : variants) {
        v.cfg.out_dir = (std::filesystem::path(base.out_dir) / (axis + "_" + v.name)).string();
        const TrainResult tr = train(manifest, v.cfg);
        const EvalResult ev = evaluate(tr.checkpoint, manifest, "test", v.cfg.mu);
        AblateRow row;
        row.axis = axis;
        row.variant = v.name;
        row.dataset_hash = dataset_hash;
        row.seed = v.cfg.seed;
        row.ldr_psnr = ev.mean_ldr_psnr;
        row.ldr_ssim = ev.mean_ldr_ssim;
        row.hdr_psnr = ev.mean_hdr_psnr;
        row.hdr_ssim = ev.mean_hdr_ssim;
        row.train_seconds = tr.seconds;
        rows.push_back(row);
    }
    return rows;
}

void write_ablate_csv(const std::vector<AblateRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write ablation table: " + path.string());
    out << "axis,variant,dataset_hash,seed,ldr_psnr,ldr_ssim,hdr_psnr,hdr_ssim,train_seconds\n";
    for (const AblateRow& r : rows) {
        char hash[32];
        std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(r.dataset_hash));
        out << r.axis << "," << r.variant << "," << hash << "," << r.seed << "," << r.ldr_psnr << "," << r.ldr_ssim
            << "," << r.hdr_psnr << "," << r.hdr_ssim << "," << r.train_seconds << "\n";
    }
}

} // namespace hdrsplat

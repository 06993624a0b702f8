// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Single entry point: datagen, train, render, eval, gradcheck, bench, ablate.
// Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.

#include "hdrsplat/datagen.hpp"
#include "hdrsplat/gradcheck.hpp"
#include "hdrsplat/trainer.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <iostream>
#include <sstream>

namespace {

using namespace hdrsplat;

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Config file (key = value lines)");
    cmd->add_option("--seed", flags.seed, "Random seed")->each([&flags](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--threads", flags.threads, "Worker threads (0 = library default)");
}

TrainConfig load_config(const CommonFlags& flags) {
    TrainConfig cfg;
    if (!flags.config_path.empty())
        cfg.apply_file(flags.config_path);
    if (flags.seed_set)
        cfg.seed = flags.seed;
    return cfg;
}

void apply_threads(const CommonFlags& flags) {
    if (flags.threads > 0)
        omp_set_num_threads(flags.threads);
}

std::vector<double> parse_exposures(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(std::stod(item));
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

int cmd_datagen(const SceneSpec& spec, const std::string& out_dir) {
    const Manifest m = write_dataset(spec, out_dir);
    int ldr = 0, hdr = 0;
    for (const auto& f : m.frames) {
        ldr += f.is_ldr();
        hdr += f.is_hdr();
    }
    std::cout << "wrote " << ldr << " LDR and " << hdr << " HDR frames, " << m.frames.size() << " manifest entries to "
              << out_dir << "\n";
    return 0;
}

int cmd_train(const TrainConfig& cfg) {
    const Manifest manifest = Manifest::load(std::filesystem::path(cfg.data_dir) / "manifest.json");
    const TrainResult res = train(manifest, cfg);
    std::cout << "trained " << cfg.iterations << " iterations in " << res.seconds << "s, final loss "
              << res.final_loss << "\n"
              << "checkpoint: " << res.checkpoint_path.string() << "\n"
              << "log: " << res.log_path.string() << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& split,
             const std::string& out_csv, double mu) {
    const Checkpoint ck = Checkpoint::load(ckpt_path);
    const Manifest manifest = Manifest::load(std::filesystem::path(data_dir) / "manifest.json");
    const EvalResult ev = evaluate(ck, manifest, split, mu);
    ev.write_csv(out_csv, manifest.base_dir.filename().string());
    std::cout << "frames: " << ev.ldr_frames << " ldr, " << ev.hdr_frames << " hdr_mu\n"
              << "mean ldr   psnr " << ev.mean_ldr_psnr << "  ssim " << ev.mean_ldr_ssim << "\n"
              << "mean hdr_mu psnr " << ev.mean_hdr_psnr << "  ssim " << ev.mean_hdr_ssim << "\n"
              << "render speed " << ev.fps << " fps\n"
              << "metrics: " << out_csv << "\n";
    return 0;
}

int cmd_render(const std::string& ckpt_path, const std::string& data_dir, int frame_id, bool all_test, double time,
               double exposure, const std::string& mode, const std::string& out_prefix) {
    const Checkpoint ck = Checkpoint::load(ckpt_path);
    RenderOptions opts;

    struct Job {
        CameraT<float> camera;
        double time;
        double exposure;
        std::string tag;
    };
    std::vector<Job> jobs;

    if (!data_dir.empty()) {
        const Manifest manifest = Manifest::load(std::filesystem::path(data_dir) / "manifest.json");
        if (all_test) {
            int idx = 0;
            for (const auto& f : manifest.frames)
                if (f.split == "test" && f.is_ldr())
                    jobs.push_back({f.camera.cast<float>(), f.time, f.exposure, "test" + std::to_string(idx++)});
        } else {
            if (frame_id < 0 || frame_id >= static_cast<int>(manifest.frames.size()))
                throw ContractViolation("frame id out of range");
            const auto& f = manifest.frames[frame_id];
            jobs.push_back({f.camera.cast<float>(), time >= 0 ? time : f.time,
                            exposure > 0 ? exposure : (f.exposure > 0 ? f.exposure : 1.0),
                            "frame" + std::to_string(frame_id)});
        }
    } else {
        SceneSpec spec;
        jobs.push_back({scene_camera(spec, 0).cast<float>(), time >= 0 ? time : 0.5, exposure > 0 ? exposure : 1.0,
                        "view"});
    }

    for (Job& job : jobs) {
        double t = job.time;
        if (t < 0.0 || t > 1.0) {
            std::cerr << "warning: time " << t << " clamped to [0,1]\n";
            t = std::clamp(t, 0.0, 1.0);
        }
        const int t_index = nearest_time_index(ck.timestamps, t);
        const std::string base = out_prefix + "_" + job.tag;
        if (mode == "hdr" || mode == "both") {
            const Image hdr = render_hdr<float>(ck.cloud, job.camera, static_cast<float>(t), opts);
            write_pfm(base + "_hdr.pfm", hdr);
            write_png(base + "_hdr_mulaw.png", mu_law(hdr, 5000.0f)); // display preview
        }
        if (mode == "ldr" || mode == "both") {
            const Image ldr = render_ldr3d<float>(ck.cloud, ck.tone, job.camera, static_cast<float>(t), t_index,
                                                  static_cast<float>(job.exposure), opts);
            write_png(base + "_ldr.png", ldr);
        }
    }
    std::cout << "rendered " << jobs.size() << " view(s) to " << out_prefix << "_*\n";
    return 0;
}

int cmd_gradcheck(const GradCheckOptions& opt) {
    const GradCheckReport report = run_gradcheck(opt);
    report.print(std::cout);
    if (!report.passed()) {
        for (const auto& g : report.groups)
            if (!(g.max_rel_err < report.tolerance))
                std::cout << "FAILED group: " << g.name << "\n";
        return 1;
    }
    std::cout << "gradcheck passed\n";
    return 0;
}

int cmd_bench(const std::string& ckpt_path, int frames, const std::string& thread_list) {
    const Checkpoint ck = Checkpoint::load(ckpt_path);
    SceneSpec spec;
    const CameraT<float> camera = scene_camera(spec, 0).cast<float>();
    RenderOptions opts;

    std::vector<int> thread_counts;
    {
        std::stringstream ss(thread_list);
        std::string item;
        while (std::getline(ss, item, ','))
            thread_counts.push_back(std::stoi(item));
    }
    if (thread_counts.empty())
        thread_counts = {1, omp_get_max_threads()};

    std::cout << "gaussians " << ck.cloud.count() << ", image " << camera.width << "x" << camera.height << "\n";
    Image reference_img;
    bool mismatch = false;
    for (int threads : thread_counts) {
        omp_set_num_threads(threads);
        render_hdr<float>(ck.cloud, camera, 0.5f, opts); // warm cache
        std::vector<double> times;
        Image img;
        for (int i = 0; i < frames; ++i) {
            const float t = static_cast<float>(i) / std::max(1, frames - 1);
            const auto t0 = std::chrono::steady_clock::now();
            img = render_hdr<float>(ck.cloud, camera, t, opts);
            times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        if (threads == thread_counts.front())
            reference_img = img;
        else if (img.data != reference_img.data)
            mismatch = true;
        std::cout << "threads " << threads << ": median " << median(times) * 1e3 << " ms/frame, "
                  << 1.0 / median(times) << " fps\n";
    }
    if (mismatch) {
        std::cout << "FAILED: images differ across thread counts\n";
        return 1;
    }
    return 0;
}

int cmd_ablate(const TrainConfig& base, const std::string& axis, const std::string& out_csv) {
    const Manifest manifest = Manifest::load(std::filesystem::path(base.data_dir) / "manifest.json");
    const auto rows = ablate(manifest, base, axis);
    write_ablate_csv(rows, out_csv);
    std::cout << "wrote " << rows.size() << " variants to " << out_csv << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HDR dynamic scene reconstruction with 4D Gaussian splatting"};
    app.require_subcommand(1);

    // datagen
    auto* dg = app.add_subcommand("datagen", "Generate a synthetic multi-exposure dataset");
    CommonFlags dg_flags;
    SceneSpec spec;
    std::string dg_out = "data/two-sphere";
    std::string dg_exposures;
    bool dg_no_hdr = false;
    dg->add_option("--scene", spec.name, "Scene name");
    dg->add_option("--pattern", spec.pattern, "Capture pattern: stereo | monocular");
    dg->add_option("--timesteps", spec.timesteps, "Number of timesteps");
    dg->add_option("--cameras", spec.cameras, "Number of ring cameras");
    dg->add_option("--size", spec.size, "Image size (square)");
    dg->add_option("--exposures", dg_exposures, "Comma-separated exposure seconds");
    dg->add_flag("--with-hdr", spec.with_hdr, "Write HDR ground truth");
    dg->add_flag("--no-hdr", dg_no_hdr, "Skip HDR ground truth");
    dg->add_option("--out", dg_out, "Output directory");
    add_common(dg, dg_flags);

    // train
    auto* tr = app.add_subcommand("train", "Optimize a scene from a dataset");
    CommonFlags tr_flags;
    std::string tr_data, tr_out;
    std::vector<std::string> tr_set;
    tr->add_option("--data", tr_data, "Dataset directory (with manifest.json)");
    tr->add_option("--out", tr_out, "Run output directory");
    tr->add_option("--set", tr_set, "Override any config key, key=value")->take_all();
    add_common(tr, tr_flags);

    // render
    auto* rd = app.add_subcommand("render", "Render a checkpoint at a time/viewpoint");
    CommonFlags rd_flags;
    std::string rd_ckpt, rd_data, rd_mode = "both", rd_out = "render";
    int rd_frame = -1;
    bool rd_all_test = false;
    double rd_time = -1.0, rd_exposure = -1.0;
    rd->add_option("--checkpoint", rd_ckpt, "Checkpoint path")->required();
    rd->add_option("--data", rd_data, "Dataset directory for camera/frame lookup");
    rd->add_option("--frame", rd_frame, "Manifest frame index");
    rd->add_flag("--all-test", rd_all_test, "Render every test frame of the manifest");
    rd->add_option("--time", rd_time, "Query time in [0,1]");
    rd->add_option("--exposure", rd_exposure, "Exposure seconds for the LDR path");
    rd->add_option("--mode", rd_mode, "hdr | ldr | both");
    rd->add_option("--out", rd_out, "Output file prefix");
    add_common(rd, rd_flags);

    // eval
    auto* ev = app.add_subcommand("eval", "Compute metrics on a dataset split");
    CommonFlags ev_flags;
    std::string ev_ckpt, ev_data, ev_split = "test", ev_out = "metrics.csv";
    ev->add_option("--checkpoint", ev_ckpt, "Checkpoint path")->required();
    ev->add_option("--data", ev_data, "Dataset directory")->required();
    ev->add_option("--split", ev_split, "train | test");
    ev->add_option("--out", ev_out, "Metrics CSV path");
    add_common(ev, ev_flags);

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference verification of all gradients");
    CommonFlags gc_flags;
    GradCheckOptions gc_opt;
    gc->add_option("--gaussians", gc_opt.n_gaussians, "Scene size");
    gc->add_option("--image-size", gc_opt.image_size, "Render size");
    gc->add_option("--cell", gc_opt.cell, "Context cell: gru | rnn");
    gc->add_option("--tolerance", gc_opt.tolerance, "Max relative error");
    gc->add_option("--inject-wrong-sign", gc_opt.inject_wrong_sign, "Flip one group's gradient (self-test)");
    add_common(gc, gc_flags);

    // bench
    auto* bn = app.add_subcommand("bench", "Measure render throughput per thread count");
    CommonFlags bn_flags;
    std::string bn_ckpt, bn_threads;
    int bn_frames = 20;
    bn->add_option("--checkpoint", bn_ckpt, "Checkpoint path")->required();
    bn->add_option("--frames", bn_frames, "Renders per thread count (>= 20 recommended)");
    bn->add_option("--thread-list", bn_threads, "Comma-separated thread counts");
    add_common(bn, bn_flags);

    // ablate
    auto* ab = app.add_subcommand("ablate", "Run an ablation grid with shared seed and dataset");
    CommonFlags ab_flags;
    std::string ab_data, ab_axis, ab_out = "ablate.csv", ab_run_dir = "ablate_runs";
    std::vector<std::string> ab_set;
    ab->add_option("--data", ab_data, "Dataset directory")->required();
    ab->add_option("--axis", ab_axis, "cell_kind | k | pixel_level | supervision")->required();
    ab->add_option("--out", ab_out, "Output CSV");
    ab->add_option("--run-dir", ab_run_dir, "Directory for per-variant runs");
    ab->add_option("--set", ab_set, "Override any config key, key=value")->take_all();
    add_common(ab, ab_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    auto apply_sets = [](TrainConfig& cfg, const std::vector<std::string>& sets) {
        for (const std::string& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ContractViolation("--set expects key=value, got: " + kv);
            cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
        }
    };

    try {
        if (dg->parsed()) {
            apply_threads(dg_flags);
            if (!dg_exposures.empty())
                spec.exposures = parse_exposures(dg_exposures);
            if (dg_no_hdr)
                spec.with_hdr = false;
            return cmd_datagen(spec, dg_out);
        }
        if (tr->parsed()) {
            apply_threads(tr_flags);
            TrainConfig cfg = load_config(tr_flags);
            if (!tr_data.empty())
                cfg.data_dir = tr_data;
            if (!tr_out.empty())
                cfg.out_dir = tr_out;
            apply_sets(cfg, tr_set);
            if (tr_flags.seed_set)
                cfg.seed = tr_flags.seed;
            if (cfg.data_dir.empty())
                throw ContractViolation("train needs --data or data_dir in the config");
            return cmd_train(cfg);
        }
        if (rd->parsed()) {
            apply_threads(rd_flags);
            return cmd_render(rd_ckpt, rd_data, rd_frame, rd_all_test, rd_time, rd_exposure, rd_mode, rd_out);
        }
        if (ev->parsed()) {
            apply_threads(ev_flags);
            TrainConfig cfg = load_config(ev_flags);
            return cmd_eval(ev_ckpt, ev_data, ev_split, ev_out, cfg.mu);
        }
        if (gc->parsed()) {
            apply_threads(gc_flags);
            if (gc_flags.seed_set)
                gc_opt.seed = static_cast<unsigned>(gc_flags.seed);
            return cmd_gradcheck(gc_opt);
        }
        if (bn->parsed()) {
            apply_threads(bn_flags);
            return cmd_bench(bn_ckpt, bn_frames, bn_threads);
        }
        if (ab->parsed()) {
            apply_threads(ab_flags);
            TrainConfig cfg = load_config(ab_flags);
            cfg.data_dir = ab_data;
            cfg.out_dir = ab_run_dir;
            apply_sets(cfg, ab_set);
            if (ab_flags.seed_set)
                cfg.seed = ab_flags.seed;
            return cmd_ablate(cfg, ab_axis, ab_out);
        }
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const ManifestError& e) {
        std::cerr << "manifest error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

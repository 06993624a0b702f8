// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>

namespace hdrsplat {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json camera_to_json(const Camera& c) {
    ordered_json j;
    ordered_json rot = ordered_json::array();
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k)
            rot.push_back(c.rotation(r, k));
    j["rotation"] = rot;
    j["translation"] = {c.translation[0], c.translation[1], c.translation[2]};
    j["fx"] = c.fx;
    j["fy"] = c.fy;
    j["cx"] = c.cx;
    j["cy"] = c.cy;
    j["width"] = c.width;
    j["height"] = c.height;
    return j;
}

Camera camera_from_json(const ordered_json& j) {
    Camera c;
    const auto& rot = j.at("rotation");
    if (rot.size() != 9)
        throw ManifestError("camera rotation must have 9 entries");
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k)
            c.rotation(r, k) = rot[r * 3 + k].get<float>();
    const auto& tr = j.at("translation");
    for (int k = 0; k < 3; ++k)
        c.translation[k] = tr.at(k).get<float>();
    c.fx = j.at("fx").get<float>();
    c.fy = j.at("fy").get<float>();
    c.cx = j.at("cx").get<float>();
    c.cy = j.at("cy").get<float>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    return c;
}

} // namespace

std::string Manifest::canonical_json() const {
    ordered_json root;
    root["format"] = "hdrsplat-dataset-v1";
    ordered_json arr = ordered_json::array();
    for (const FrameRecord& f : frames) {
        ordered_json j;
        if (f.is_ldr())
            j["ldr_path"] = f.ldr_path;
        if (f.is_hdr())
            j["hdr_path"] = f.hdr_path;
        j["time"] = f.time;
        if (f.is_ldr())
            j["exposure"] = f.exposure;
        j["camera_id"] = f.camera_id;
        j["camera"] = camera_to_json(f.camera);
        j["split"] = f.split;
        arr.push_back(std::move(j));
    }
    root["frames"] = std::move(arr);
    return root.dump(2) + "\n";
}

void Manifest::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write manifest: " + path.string());
    out << canonical_json();
}

Manifest Manifest::load(const std::filesystem::path& path, bool check_files) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ManifestError("cannot open manifest: " + path.string());
    ordered_json root;
    try {
        in >> root;
    } catch (const std::exception& e) {
        throw ManifestError(std::string("manifest parse failure: ") + e.what());
    }

    Manifest m;
    m.base_dir = path.parent_path();
    for (const auto& j : root.at("frames")) {
        FrameRecord f;
        f.ldr_path = j.value("ldr_path", "");
        f.hdr_path = j.value("hdr_path", "");
        f.time = j.at("time").get<double>();
        f.exposure = j.value("exposure", 0.0);
        f.camera_id = j.at("camera_id").get<int>();
        f.camera = camera_from_json(j.at("camera"));
        f.split = j.at("split").get<std::string>();
        if (!f.is_ldr() && !f.is_hdr())
            throw ManifestError("frame record without any image path");
        if (f.is_ldr() && !(f.exposure > 0.0))
            throw ManifestError("LDR record without a positive exposure");
        if (f.time < 0.0 || f.time > 1.0)
            throw ManifestError("frame time outside [0,1]");
        if (f.split != "train" && f.split != "test")
            throw ManifestError("unknown split tag: " + f.split);
        m.frames.push_back(std::move(f));
    }

    if (check_files) {
        for (const FrameRecord& f : m.frames) {
            if (f.is_ldr() && !std::filesystem::exists(m.resolve(f.ldr_path)))
                throw ManifestError("missing LDR file: " + f.ldr_path);
            if (f.is_hdr() && !std::filesystem::exists(m.resolve(f.hdr_path)))
                throw ManifestError("missing HDR file: " + f.hdr_path);
        }
    }

    // times must be ascending per camera
    std::map<int, double> last;
    for (const FrameRecord& f : m.frames) {
        auto it = last.find(f.camera_id);
        if (it != last.end() && f.time < it->second)
            throw ManifestError("frame times are not sorted for camera " + std::to_string(f.camera_id));
        last[f.camera_id] = f.time;
    }
    return m;
}

std::vector<double> Manifest::unique_times() const {
    std::vector<double> t;
    t.reserve(frames.size());
    for (const FrameRecord& f : frames)
        t.push_back(f.time);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

} // namespace hdrsplat

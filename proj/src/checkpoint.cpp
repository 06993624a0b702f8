// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace hdrsplat {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'H', 'S', 'P', 'L', 'A', 'T', 'C', 'K'};

struct ArrayRef {
    std::string name;
    std::vector<std::int64_t> shape;
    const float* data;
    std::size_t size;
};

template <typename Derived>
ArrayRef ref(const std::string& name, const Eigen::MatrixBase<Derived>& m) {
    return {name, {m.rows(), m.cols()}, m.derived().data(), static_cast<std::size_t>(m.size())};
}

void collect(const Checkpoint& ck, std::vector<ArrayRef>& arrays, std::vector<float>& bank_init_scratch) {
    arrays.push_back(ref("mean4", ck.cloud.mean4));
    arrays.push_back(ref("log_scale4", ck.cloud.log_scale4));
    arrays.push_back(ref("quat_left", ck.cloud.quat_left));
    arrays.push_back(ref("quat_right", ck.cloud.quat_right));
    arrays.push_back(ref("raw_opacity", ck.cloud.raw_opacity));
    arrays.push_back(ref("sh", ck.cloud.sh));
    arrays.push_back(ref("bank_entries", ck.tone.bank.entries));

    bank_init_scratch.resize(ck.tone.bank.initialized.size());
    for (std::size_t i = 0; i < bank_init_scratch.size(); ++i)
        bank_init_scratch[i] = ck.tone.bank.initialized[i] ? 1.0f : 0.0f;
    arrays.push_back({"bank_init", {static_cast<std::int64_t>(bank_init_scratch.size()), 1},
                      bank_init_scratch.data(), bank_init_scratch.size()});

    auto& tone = const_cast<ToneMapperState&>(ck.tone);
    tone.for_each_param([&](const std::string& name, Eigen::MatrixXf& m) { arrays.push_back(ref(name, m)); });

    for (const auto& [key, state] : ck.adam) {
        arrays.push_back({"adam_m_" + key, {static_cast<std::int64_t>(state.m.size()), 1}, state.m.data(),
                          state.m.size()});
        arrays.push_back({"adam_v_" + key, {static_cast<std::int64_t>(state.v.size()), 1}, state.v.data(),
                          state.v.size()});
    }
}

} // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
    std::vector<ArrayRef> arrays;
    std::vector<float> bank_init_scratch;
    collect(*this, arrays, bank_init_scratch);

    ordered_json header;
    header["version"] = 1;
    header["iteration"] = iteration;
    header["seed"] = seed;
    header["config_hash"] = config_hash;
    header["config_text"] = config_text;
    header["skip_count"] = skip_count;
    header["cloud"] = {{"count", cloud.count()},
                       {"sh_degree", cloud.sh_degree},
                       {"fourier_degree", cloud.fourier_degree},
                       {"fourier_period", cloud.fourier_period}};
    header["tone"] = {{"cell", to_string(tone.drcl.kind)},
                      {"window_k", tone.window_k},
                      {"context_dim", tone.curves.context_dim},
                      {"hidden", tone.curves.hidden},
                      {"bank_momentum", tone.bank.momentum}};
    header["timestamps"] = timestamps;
    ordered_json steps = ordered_json::object();
    for (const auto& [key, state] : adam)
        steps[key] = state.step;
    header["adam_steps"] = steps;
    ordered_json arr = ordered_json::array();
    for (const ArrayRef& a : arrays)
        arr.push_back({{"name", a.name}, {"shape", a.shape}, {"dtype", "f32"}});
    header["arrays"] = std::move(arr);

    const std::string htext = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const ArrayRef& a : arrays)
        out.write(reinterpret_cast<const char*>(a.data), static_cast<std::streamsize>(a.size * sizeof(float)));
    if (!out)
        throw IoError("short checkpoint write: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("not a checkpoint file: " + path.string());
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in)
        throw IoError("truncated checkpoint header: " + path.string());
    const ordered_json header = ordered_json::parse(htext);

    Checkpoint ck;
    ck.iteration = header.at("iteration").get<std::int64_t>();
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.config_hash = header.at("config_hash").get<std::uint64_t>();
    ck.config_text = header.at("config_text").get<std::string>();
    ck.skip_count = header.at("skip_count").get<std::int64_t>();
    ck.timestamps = header.at("timestamps").get<std::vector<double>>();

    const auto& jc = header.at("cloud");
    ck.cloud.sh_degree = jc.at("sh_degree").get<int>();
    ck.cloud.fourier_degree = jc.at("fourier_degree").get<int>();
    ck.cloud.fourier_period = jc.at("fourier_period").get<float>();
    ck.cloud.resize(jc.at("count").get<int>());

    const auto& jt = header.at("tone");
    ck.tone.drcl.kind = cell_kind_from_string(jt.at("cell").get<std::string>());
    ck.tone.window_k = jt.at("window_k").get<int>();
    ck.tone.curves.context_dim = jt.at("context_dim").get<int>();
    ck.tone.curves.hidden = jt.at("hidden").get<int>();
    ck.tone.drcl.context_dim = ck.tone.curves.context_dim;
    ck.tone.bank.momentum = jt.at("bank_momentum").get<float>();

    for (const auto& [key, step] : header.at("adam_steps").items())
        ck.adam[key].step = step.get<std::int64_t>();

    auto read_array = [&in, &path](float* dst, std::size_t n) {
        in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n * sizeof(float)));
        if (!in)
            throw IoError("truncated checkpoint arrays: " + path.string());
    };

    for (const auto& ja : header.at("arrays")) {
        const std::string name = ja.at("name").get<std::string>();
        const auto shape = ja.at("shape").get<std::vector<std::int64_t>>();
        const std::size_t count = static_cast<std::size_t>(shape.at(0)) * static_cast<std::size_t>(shape.at(1));

        if (name == "mean4")
            read_array(ck.cloud.mean4.data(), count);
        else if (name == "log_scale4")
            read_array(ck.cloud.log_scale4.data(), count);
        else if (name == "quat_left")
            read_array(ck.cloud.quat_left.data(), count);
        else if (name == "quat_right")
            read_array(ck.cloud.quat_right.data(), count);
        else if (name == "raw_opacity")
            read_array(ck.cloud.raw_opacity.data(), count);
        else if (name == "sh")
            read_array(ck.cloud.sh.data(), count);
        else if (name == "bank_entries") {
            ck.tone.bank.entries.resize(shape.at(0), 3);
            read_array(ck.tone.bank.entries.data(), count);
        } else if (name == "bank_init") {
            std::vector<float> flags(count);
            read_array(flags.data(), count);
            ck.tone.bank.initialized.resize(count);
            for (std::size_t i = 0; i < count; ++i)
                ck.tone.bank.initialized[i] = flags[i] != 0.0f;
        } else if (name.rfind("adam_m_", 0) == 0) {
            auto& st = ck.adam[name.substr(7)];
            st.m.resize(count);
            read_array(st.m.data(), count);
        } else if (name.rfind("adam_v_", 0) == 0) {
            auto& st = ck.adam[name.substr(7)];
            st.v.resize(count);
            read_array(st.v.data(), count);
        } else {
            bool found = false;
            ck.tone.for_each_param([&](const std::string& pname, Eigen::MatrixXf& m) {
                if (pname == name) {
                    m.resize(shape.at(0), shape.at(1));
                    read_array(m.data(), count);
                    found = true;
                }
            });
            if (!found)
                throw IoError("unknown checkpoint array: " + name);
        }
    }
    return ck;
}

} // namespace hdrsplat

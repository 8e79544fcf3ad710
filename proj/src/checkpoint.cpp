#include "argmine/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "argmine/errors.hpp"
#include "json.hpp"

namespace argmine::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using json = nlohmann::ordered_json;

struct Loaded {
    CheckpointInfo info;
    std::vector<float> payload;
};

Loaded read_all(const std::filesystem::path& path, bool with_payload) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint '" + path.string() + "'");
    char magic[8];
    std::uint64_t manifest_len = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&manifest_len), sizeof manifest_len);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw LoadError("'" + path.string() + "' is not a checkpoint");
    }
    std::string manifest(manifest_len, '\0');
    in.read(manifest.data(), static_cast<std::streamsize>(manifest_len));
    if (!in) throw LoadError("checkpoint '" + path.string() + "': truncated manifest");

    Loaded out;
    std::size_t floats = 0;
    try {
        const auto j = json::parse(manifest);
        for (const auto& t : j.at("tensors")) {
            TensorEntry e;
            e.name = t.at("name").get<std::string>();
            e.component = t.at("component").get<std::string>();
            e.role = t.at("role").get<std::string>();
            e.rows = t.at("rows").get<std::size_t>();
            e.cols = t.at("cols").get<std::size_t>();
            e.offset = t.at("offset").get<std::size_t>();
            floats = std::max(floats, e.offset + e.rows * e.cols);
            out.info.tensors.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("checkpoint '" + path.string() + "': bad manifest: " + e.what());
    }
    out.info.header_bytes = 16 + manifest_len;
    out.info.payload_bytes = 4 * floats;
    if (with_payload) {
        out.payload.resize(floats);
        in.read(reinterpret_cast<char*>(out.payload.data()), static_cast<std::streamsize>(4 * floats));
        if (!in) throw LoadError("checkpoint '" + path.string() + "': truncated payload");
    }
    return out;
}

void restore(const TensorEntry& e, const std::vector<float>& payload, Parameter& p) {
    if (static_cast<std::size_t>(p.value.rows()) != e.rows ||
        static_cast<std::size_t>(p.value.cols()) != e.cols) {
        throw ShapeError("checkpoint tensor '" + e.name + "' is " + std::to_string(e.rows) + "x" +
                         std::to_string(e.cols) + ", model expects " + std::to_string(p.value.rows()) + "x" +
                         std::to_string(p.value.cols()));
    }
    for (std::size_t i = 0; i < e.rows * e.cols; ++i) {
        p.value.data()[i] = static_cast<double>(payload[e.offset + i]);
    }
}

}  // namespace

CheckpointInfo save_tensors(const std::filesystem::path& path,
                            const std::vector<std::pair<std::string, const Parameter*>>& tensors) {
    CheckpointInfo info;
    std::vector<float> payload;
    json manifest;
    manifest["format"] = 1;
    manifest["dtype"] = "float32";
    json list = json::array();
    for (const auto& [component, p] : tensors) {
        TensorEntry e{p->name, component, p->trainable ? "trainable" : "frozen",
                      static_cast<std::size_t>(p->value.rows()), static_cast<std::size_t>(p->value.cols()),
                      payload.size()};
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            const double v = p->value.data()[i];
            const float f = static_cast<float>(v);
            if (static_cast<double>(f) != v) {
                throw ValidationError("tensor '" + p->name + "' holds a value that is not fp32-representable");
            }
            payload.push_back(f);
        }
        list.push_back({{"name", e.name}, {"component", e.component}, {"role", e.role},
                        {"rows", e.rows}, {"cols", e.cols}, {"offset", e.offset}});
        info.tensors.push_back(std::move(e));
    }
    manifest["tensors"] = std::move(list);
    const std::string text = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write checkpoint '" + path.string() + "'");
    const std::uint64_t len = text.size();
    out.write(kCheckpointMagic, 8);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(4 * payload.size()));
    if (!out) throw LoadError("failed writing checkpoint '" + path.string() + "'");
    info.header_bytes = 16 + text.size();
    info.payload_bytes = 4 * payload.size();
    return info;
}

CheckpointInfo serialize_trainable(ModelAssembly& m, const std::filesystem::path& path) {
    std::vector<std::pair<std::string, const Parameter*>> tensors;
    for (auto& [component, p] : m.components()) {
        if (p->trainable) tensors.emplace_back(component, p);
    }
    return save_tensors(path, tensors);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
    return read_all(path, false).info;
}

void deserialize_trainable(const std::filesystem::path& path, ModelAssembly& m) {
    const auto loaded = read_all(path, true);
    std::map<std::string, Parameter*> by_name;
    for (auto* p : m.parameters()) by_name.emplace(p->name, p);
    std::map<std::string, const TensorEntry*> in_file;
    for (const auto& e : loaded.info.tensors) in_file.emplace(e.name, &e);

    for (auto* p : m.trainable_parameters()) {
        if (!in_file.contains(p->name)) {
            throw ShapeError("checkpoint '" + path.string() + "' lacks tensor '" + p->name + "'");
        }
    }
    // validate everything before touching the assembly
    for (const auto& e : loaded.info.tensors) {
        auto it = by_name.find(e.name);
        if (it == by_name.end()) {
            throw ShapeError("checkpoint tensor '" + e.name + "' has no counterpart in the assembly");
        }
        const Parameter& p = *it->second;
        if (static_cast<std::size_t>(p.value.rows()) != e.rows ||
            static_cast<std::size_t>(p.value.cols()) != e.cols) {
            restore(e, loaded.payload, *it->second);  // throws with the shape message
        }
    }
    for (const auto& e : loaded.info.tensors) restore(e, loaded.payload, *by_name.at(e.name));
}

std::size_t load_matching(const std::filesystem::path& path, const std::vector<Parameter*>& params) {
    const auto loaded = read_all(path, true);
    std::map<std::string, Parameter*> by_name;
    for (auto* p : params) by_name.emplace(p->name, p);
    std::size_t restored = 0;
    for (const auto& e : loaded.info.tensors) {
        auto it = by_name.find(e.name);
        if (it == by_name.end()) continue;
        restore(e, loaded.payload, *it->second);
        ++restored;
    }
    return restored;
}

}  // namespace argmine::nn

#include "dnr/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "dnr/errors.hpp"
#include "dnr/io.hpp"

namespace dnr::nn {

using nlohmann::json;

namespace {

constexpr const char* format_tag = "dnrnet-checkpoint-1";

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

size_t element_count(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d < 1) throw IoError("checkpoint: non-positive tensor dimension");
        n *= static_cast<size_t>(d);
    }
    return n;
}

std::filesystem::path payload_path(const std::filesystem::path& manifest, const std::string& file) {
    return manifest.parent_path() / file;
}

}  // namespace

const TensorRecord& Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    throw IoError("checkpoint: missing tensor '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& manifest, const Checkpoint& ckpt) {
    const std::string payload_file = manifest.stem().string() + ".bin";
    json doc;
    doc["format"] = format_tag;
    doc["payload"] = payload_file;
    doc["dtype"] = "float32-le";
    doc["metadata"] = ckpt.metadata;
    doc["tensors"] = json::array();

    std::ofstream out(payload_path(manifest, payload_file), std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint payload next to " + manifest.string());
    size_t offset = 0;
    for (const auto& t : ckpt.tensors) {
        if (element_count(t.shape) != t.values.size())
            throw DimensionError("checkpoint: tensor '" + t.name + "' size does not match its shape");
        doc["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"count", t.values.size()}});
        for (float v : t.values) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            bits = to_little(bits);
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
        offset += t.values.size() * sizeof(float);
    }
    if (!out) throw IoError("checkpoint payload write failed");
    doc["payload_bytes"] = offset;
    io::write_text(manifest, doc.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest) {
    json doc;
    try {
        doc = json::parse(io::read_text(manifest));
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint manifest " + manifest.string() + ": " + e.what());
    }
    Checkpoint ckpt;
    try {
        if (doc.at("format").get<std::string>() != format_tag) throw IoError("checkpoint: unknown format tag");
        if (doc.at("dtype").get<std::string>() != "float32-le") throw IoError("checkpoint: unsupported dtype");
        ckpt.metadata = doc.at("metadata");
        const auto path = payload_path(manifest, doc.at("payload").get<std::string>());
        const auto declared = doc.at("payload_bytes").get<size_t>();
        std::error_code ec;
        const auto actual = std::filesystem::file_size(path, ec);
        if (ec) throw IoError("checkpoint: cannot stat payload " + path.string());
        if (actual != declared)
            throw IoError("checkpoint: payload is " + std::to_string(actual) + " bytes, manifest declares " +
                          std::to_string(declared));
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("checkpoint: cannot open payload " + path.string());

        for (const auto& jt : doc.at("tensors")) {
            TensorRecord t;
            t.name = jt.at("name").get<std::string>();
            t.shape = jt.at("shape").get<std::vector<int>>();
            const auto offset = jt.at("offset").get<size_t>();
            const auto count = jt.at("count").get<size_t>();
            if (count != element_count(t.shape)) throw IoError("checkpoint: count/shape mismatch for " + t.name);
            if (offset + count * sizeof(float) > declared) throw IoError("checkpoint: tensor beyond payload end");
            t.values.resize(count);
            in.seekg(static_cast<std::streamoff>(offset));
            for (size_t k = 0; k < count; ++k) {
                std::uint32_t bits;
                in.read(reinterpret_cast<char*>(&bits), sizeof bits);
                bits = to_little(bits);
                std::memcpy(&t.values[k], &bits, sizeof bits);
            }
            if (!in) throw IoError("checkpoint: truncated payload reading " + t.name);
            ckpt.tensors.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint manifest " + manifest.string() + ": " + e.what());
    }
    return ckpt;
}

}  // namespace dnr::nn

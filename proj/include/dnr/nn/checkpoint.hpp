#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace dnr::nn {

struct TensorRecord {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

/// Manifest (JSON: metadata + tensor name/shape/offset/count list) next to a flat
/// little-endian float32 payload. The payload is `<manifest stem>.bin` in the
/// same directory.
struct Checkpoint {
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<TensorRecord> tensors;

    const TensorRecord& find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& manifest, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& manifest);

}  // namespace dnr::nn

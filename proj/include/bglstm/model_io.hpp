#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"

#include "bglstm/network.hpp"
#include "bglstm/optim.hpp"

namespace bglstm {

// Layout: "BGLM" | u32 version | u32 header length | JSON header |
// f64 LE payload | u32 CRC-32 of the payload. The payload holds the trainable
// tensors in Autoencoder::parameter_spans() order, then the batch-norm running
// statistics, then (optionally) the Adam first and second moments.
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelBundle {
    Autoencoder model;
    std::optional<AdamState> optimizer;
    nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json config_to_json(const AutoencoderConfig& config);
AutoencoderConfig config_from_json(const nlohmann::json& j);

std::vector<std::uint8_t> serialize_model(const Autoencoder& model, const AdamState* optimizer = nullptr,
                                          const nlohmann::json& metadata = nlohmann::json::object());
// Throws FormatError with BadMagic, BadVersion, BadChecksum or Malformed.
ModelBundle deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const std::filesystem::path& path, const Autoencoder& model, const AdamState* optimizer = nullptr,
                const nlohmann::json& metadata = nlohmann::json::object());
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace bglstm

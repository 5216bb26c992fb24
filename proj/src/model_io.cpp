#include "bglstm/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include <zlib.h>

#include "bglstm/errors.hpp"
#include "bglstm/io.hpp"

namespace bglstm {

namespace {

using Code = FormatError::Code;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
}

double get_f64(const std::uint8_t* p) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(p[k]) << (8 * k);
    return std::bit_cast<double>(bits);
}

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    while (n > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::size_t total_size(const std::vector<std::span<const double>>& spans) {
    std::size_t n = 0;
    for (auto s : spans) n += s.size();
    return n;
}

}  // namespace

nlohmann::json config_to_json(const AutoencoderConfig& c) {
    return {
        {"frame_dim", c.frame_dim},
        {"T", c.T},
        {"hidden", c.hidden},
        {"output_dim", c.output_dim},
        {"variant",
         {{"kind", to_string(c.variant.kind)},
          {"candidate", to_string(c.variant.candidate)},
          {"literal_eq13", c.variant.literal_eq13}}},
        {"activation", to_string(c.activation)},
        {"bn_epsilon", c.bn_epsilon},
        {"bn_momentum", c.bn_momentum},
    };
}

AutoencoderConfig config_from_json(const nlohmann::json& j) {
    AutoencoderConfig c;
    c.frame_dim = j.at("frame_dim").get<std::size_t>();
    c.T = j.at("T").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.output_dim = j.at("output_dim").get<std::size_t>();
    const auto& v = j.at("variant");
    c.variant.kind = parse_cell_kind(v.at("kind").get<std::string>());
    c.variant.candidate = parse_candidate_activation(v.at("candidate").get<std::string>());
    c.variant.literal_eq13 = v.at("literal_eq13").get<bool>();
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.bn_epsilon = j.at("bn_epsilon").get<double>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    return c;
}

std::vector<std::uint8_t> serialize_model(const Autoencoder& model, const AdamState* optimizer,
                                          const nlohmann::json& metadata) {
    const auto params = model.parameter_spans();
    const auto stats = model.running_stat_spans();
    const std::size_t n_params = total_size(params);
    const std::size_t n_stats = total_size(stats);

    nlohmann::json header{
        {"config", config_to_json(model.config())},
        {"param_count", n_params},
        {"running_stat_count", n_stats},
        {"metadata", metadata},
    };
    if (optimizer) {
        if (optimizer->m.size() != params.size() || optimizer->v.size() != params.size())
            throw ShapeError("serialize_model: optimizer state does not match the model");
        for (std::size_t k = 0; k < params.size(); ++k)
            if (optimizer->m[k].size() != params[k].size() || optimizer->v[k].size() != params[k].size())
                throw ShapeError("serialize_model: optimizer tensor shape mismatch");
        header["optimizer"] = {
            {"step", optimizer->step},
            {"learning_rate", optimizer->hyper.learning_rate},
            {"beta1", optimizer->hyper.beta1},
            {"beta2", optimizer->hyper.beta2},
            {"epsilon", optimizer->hyper.epsilon},
        };
    } else {
        header["optimizer"] = nullptr;
    }
    const std::string text = header.dump();

    std::vector<std::uint8_t> out{'B', 'G', 'L', 'M'};
    put_u32(out, kModelFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    const std::size_t payload_start = out.size();
    out.reserve(out.size() + 8 * (n_params + n_stats + (optimizer ? 2 * n_params : 0)) + 4);
    for (auto s : params)
        for (double v : s) put_f64(out, v);
    for (auto s : stats)
        for (double v : s) put_f64(out, v);
    if (optimizer) {
        for (const auto& t : optimizer->m)
            for (double v : t) put_f64(out, v);
        for (const auto& t : optimizer->v)
            for (double v : t) put_f64(out, v);
    }
    put_u32(out, crc32_of(out.data() + payload_start, out.size() - payload_start));
    return out;
}

ModelBundle deserialize_model(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "BGLM", 4) != 0) throw FormatError(Code::BadMagic, "not a model file");
    if (bytes.size() < 12) throw FormatError(Code::Malformed, "truncated model file");
    const std::uint32_t version = get_u32(bytes.data() + 4);
    if (version != kModelFormatVersion)
        throw FormatError(Code::BadVersion, "unsupported model format version " + std::to_string(version));
    const std::size_t header_len = get_u32(bytes.data() + 8);
    if (bytes.size() < 12 + header_len + 4) throw FormatError(Code::Malformed, "truncated model header");
    const std::size_t payload_start = 12 + header_len;
    const std::size_t payload_len = bytes.size() - 4 - payload_start;

    ModelBundle bundle;
    std::size_t n_params = 0, n_stats = 0;
    bool has_opt = false;
    nlohmann::json opt_json;
    try {
        const auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + static_cast<long>(payload_start));
        const AutoencoderConfig config = config_from_json(header.at("config"));
        config.validate();
        n_params = header.at("param_count").get<std::size_t>();
        n_stats = header.at("running_stat_count").get<std::size_t>();
        bundle.metadata = header.value("metadata", nlohmann::json::object());
        opt_json = header.at("optimizer");
        has_opt = !opt_json.is_null();
        // Validate sizes before allocating anything the header asks for.
        std::size_t arch_params = 0, arch_stats = 0, in = config.frame_dim;
        for (std::size_t h : config.hidden) {
            arch_params += param_count(config.variant.kind, in, h) + 2 * h;
            arch_stats += 2 * h;
            in = h;
        }
        arch_params += param_count(config.variant.kind, in, config.output_dim);
        if (n_params != arch_params || n_stats != arch_stats)
            throw FormatError(Code::Malformed, "header tensor counts do not match the configured architecture");
        if (payload_len != 8 * (n_params + n_stats + (has_opt ? 2 * n_params : 0)))
            throw FormatError(Code::Malformed, "payload length does not match the header");
        if (crc32_of(bytes.data() + payload_start, payload_len) != get_u32(bytes.data() + bytes.size() - 4))
            throw FormatError(Code::BadChecksum, "model payload checksum mismatch");
        bundle.model = build_autoencoder(config, 0);
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(Code::Malformed, std::string("bad model header: ") + e.what());
    }

    const auto params = bundle.model.parameter_spans();
    const auto stats = bundle.model.running_stat_spans();
    std::size_t expect_params = 0, expect_stats = 0;
    for (auto s : params) expect_params += s.size();
    for (auto s : stats) expect_stats += s.size();
    if (n_params != expect_params || n_stats != expect_stats)
        throw FormatError(Code::Malformed, "header tensor counts do not match the configured architecture");
    const std::size_t values = n_params + n_stats + (has_opt ? 2 * n_params : 0);
    if (payload_len != 8 * values) throw FormatError(Code::Malformed, "payload length does not match the header");

    const std::uint8_t* p = bytes.data() + payload_start;
    for (auto s : params)
        for (double& v : s) v = get_f64(p), p += 8;
    for (auto s : stats)
        for (double& v : s) v = get_f64(p), p += 8;
    if (has_opt) {
        AdamState opt = AdamState::for_params(std::span<const std::span<double>>(params));
        try {
            opt.step = opt_json.at("step").get<std::size_t>();
            opt.hyper.learning_rate = opt_json.at("learning_rate").get<double>();
            opt.hyper.beta1 = opt_json.at("beta1").get<double>();
            opt.hyper.beta2 = opt_json.at("beta2").get<double>();
            opt.hyper.epsilon = opt_json.at("epsilon").get<double>();
        } catch (const std::exception& e) {
            throw FormatError(Code::Malformed, std::string("bad optimizer header: ") + e.what());
        }
        for (auto& t : opt.m)
            for (double& v : t) v = get_f64(p), p += 8;
        for (auto& t : opt.v)
            for (double& v : t) v = get_f64(p), p += 8;
        bundle.optimizer = std::move(opt);
    }
    return bundle;
}

void save_model(const std::filesystem::path& path, const Autoencoder& model, const AdamState* optimizer,
                const nlohmann::json& metadata) {
    write_bytes(path, serialize_model(model, optimizer, metadata));
}

ModelBundle load_model(const std::filesystem::path& path) { return deserialize_model(read_bytes(path)); }

}  // namespace bglstm

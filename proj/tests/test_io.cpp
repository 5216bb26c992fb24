#include <filesystem>

#include "doctest.h"

#include "bglstm/data.hpp"
#include "bglstm/errors.hpp"
#include "bglstm/io.hpp"
#include "bglstm/model_io.hpp"

using namespace bglstm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "bglstm_io_tests";
    fs::create_directories(dir);
    return dir / name;
}

AutoencoderConfig tiny(CellVariant v) {
    AutoencoderConfig c;
    c.frame_dim = c.output_dim = 6;
    c.T = 3;
    c.hidden = {4, 3, 2, 3, 4};
    c.variant = v;
    return c;
}

FormatError::Code code_of(const std::vector<std::uint8_t>& bytes) {
    try {
        deserialize_model(bytes);
    } catch (const FormatError& e) {
        return e.code();
    }
    FAIL("expected a format error");
    return FormatError::Code::Malformed;
}

}  // namespace

TEST_CASE("pgm round trip") {
    Rng rng(1);
    GrayFrame f = make_texture(13, 9, rng, 0.0, 1.0);
    quantize8(f);
    const auto p = scratch("f.pgm");
    write_pgm(p, f);
    CHECK(read_pgm(p) == f);
    write_text(p, "P2\n1 1\n255\n0");
    CHECK_THROWS_AS(read_pgm(p), FormatError);
    write_text(p, "P5\n2 2\n255\n\x01");
    CHECK_THROWS_AS(read_pgm(p), FormatError);
    CHECK_THROWS_AS(read_pgm(scratch("missing.pgm")), IoError);
}

TEST_CASE("flo round trip") {
    FlowField f(3, 2);
    for (std::size_t i = 0; i < 6; ++i) f.u[i] = 0.25 * static_cast<double>(i), f.v[i] = -1.5 + static_cast<double>(i);
    const auto p = scratch("f.flo");
    write_flo(p, f);
    auto bytes = read_bytes(p);
    CHECK(bytes.size() == 12 + 6 * 8);
    CHECK(bytes[4] == 3);
    CHECK(bytes[8] == 2);
    CHECK(read_flo(p) == f);
    bytes[0] = 'X';
    write_bytes(p, bytes);
    CHECK_THROWS_AS(read_flo(p), FormatError);
}

TEST_CASE("labels csv round trip") {
    std::vector<int> labels{0, 0, 1, 1, 0};
    const auto p = scratch("labels.csv");
    write_labels_csv(p, labels);
    CHECK(read_text(p).rfind("frame_index,label\n0,0\n", 0) == 0);
    CHECK(read_labels_csv(p) == labels);
}

TEST_CASE("model file round trip and integrity") {
    auto model = build_autoencoder(tiny(CellVariant::bi_gated()), 5);
    Rng rng(2);
    std::vector<std::vector<Vector>> batch(2);
    for (auto& item : batch)
        for (int t = 0; t < 3; ++t) {
            Vector v(6);
            for (double& e : v) e = rng.normal();
            item.push_back(v);
        }
    AdamState opt;
    opt.hyper.learning_rate = 1e-3;
    for (int s = 0; s < 3; ++s) train_step(model, batch, opt);

    const auto bytes = serialize_model(model, &opt, {{"epoch", 3}});
    auto back = deserialize_model(bytes);
    CHECK(back.model == model);
    REQUIRE(back.optimizer.has_value());
    CHECK(*back.optimizer == opt);
    CHECK(back.metadata["epoch"] == 3);
    CHECK(serialize_model(back.model, &*back.optimizer, back.metadata) == bytes);

    auto plain = deserialize_model(serialize_model(model));
    CHECK_FALSE(plain.optimizer.has_value());
    CHECK(plain.model == model);

    SUBCASE("flipped payload byte") {
        auto b = bytes;
        b[b.size() - 20] ^= 0x01;
        CHECK(code_of(b) == FormatError::Code::BadChecksum);
    }
    SUBCASE("bad magic") {
        auto b = bytes;
        b[1] = 'X';
        CHECK(code_of(b) == FormatError::Code::BadMagic);
    }
    SUBCASE("bad version") {
        auto b = bytes;
        b[4] = 9;
        CHECK(code_of(b) == FormatError::Code::BadVersion);
    }
    SUBCASE("header dimension edited") {
        std::string s(bytes.begin(), bytes.end());
        const auto at = s.find("\"frame_dim\":6");
        REQUIRE(at != std::string::npos);
        s[at + 12] = '7';
        CHECK(code_of(std::vector<std::uint8_t>(s.begin(), s.end())) == FormatError::Code::Malformed);
    }
    SUBCASE("truncated") {
        auto b = bytes;
        b.resize(10);
        CHECK(code_of(b) == FormatError::Code::Malformed);
    }
    SUBCASE("file helpers") {
        const auto p = scratch("m.bglm");
        save_model(p, model, &opt);
        CHECK(load_model(p).model == model);
    }
}

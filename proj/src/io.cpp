#include "bglstm/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bglstm/errors.hpp"

namespace bglstm {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

// Skips whitespace and '#' comments in a PGM header, then reads one integer.
std::size_t pgm_number(const std::vector<std::uint8_t>& b, std::size_t& pos, const std::string& where) {
    while (pos < b.size()) {
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (std::isspace(b[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    std::size_t v = 0, digits = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
        v = v * 10 + static_cast<std::size_t>(b[pos] - '0');
        ++pos;
        if (++digits > 9) throw FormatError(FormatError::Code::Malformed, where + ": header number too large");
    }
    if (digits == 0) throw FormatError(FormatError::Code::Malformed, where + ": malformed header");
    return v;
}

}  // namespace

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return out;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string read_text(const std::filesystem::path& path) {
    auto b = read_bytes(path);
    return {b.begin(), b.end()};
}

void write_pgm(const std::filesystem::path& path, const GrayFrame& frame) {
    if (frame.pixels.size() != frame.width * frame.height) throw ShapeError("write_pgm: pixel count mismatch");
    const std::string header = "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (double p : frame.pixels) {
        if (!std::isfinite(p)) throw InvalidInput("write_pgm: non-finite pixel");
        bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0)));
    }
    write_bytes(path, bytes);
}

GrayFrame read_pgm(const std::filesystem::path& path) {
    const auto b = read_bytes(path);
    const std::string where = path.string();
    if (b.size() < 2 || b[0] != 'P' || b[1] != '5') throw FormatError(FormatError::Code::BadMagic, where + ": not a P5 PGM");
    std::size_t pos = 2;
    const std::size_t w = pgm_number(b, pos, where);
    const std::size_t h = pgm_number(b, pos, where);
    const std::size_t maxval = pgm_number(b, pos, where);
    if (maxval != 255) throw FormatError(FormatError::Code::Malformed, where + ": only maxval 255 is supported");
    if (pos >= b.size() || !std::isspace(b[pos])) throw FormatError(FormatError::Code::Malformed, where + ": bad header");
    ++pos;
    if (b.size() - pos != w * h) throw FormatError(FormatError::Code::Malformed, where + ": pixel data length mismatch");
    GrayFrame f(w, h);
    for (std::size_t i = 0; i < w * h; ++i) f.pixels[i] = static_cast<double>(b[pos + i]) / 255.0;
    return f;
}

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
    const std::size_t n = flow.width * flow.height;
    if (flow.u.size() != n || flow.v.size() != n) throw ShapeError("write_flo: field size mismatch");
    std::vector<std::uint8_t> bytes{'F', 'L', 'O', '1'};
    put_u32(bytes, static_cast<std::uint32_t>(flow.width));
    put_u32(bytes, static_cast<std::uint32_t>(flow.height));
    bytes.reserve(bytes.size() + 8 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (double c : {flow.u[i], flow.v[i]}) put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(c)));
    write_bytes(path, bytes);
}

FlowField read_flo(const std::filesystem::path& path) {
    const auto b = read_bytes(path);
    const std::string where = path.string();
    if (b.size() < 12 || std::memcmp(b.data(), "FLO1", 4) != 0)
        throw FormatError(FormatError::Code::BadMagic, where + ": not a FLO1 file");
    const std::size_t w = get_u32(b.data() + 4), h = get_u32(b.data() + 8);
    if (b.size() != 12 + 8 * w * h) throw FormatError(FormatError::Code::Malformed, where + ": payload length mismatch");
    FlowField f(w, h);
    for (std::size_t i = 0; i < w * h; ++i) {
        f.u[i] = std::bit_cast<float>(get_u32(b.data() + 12 + 8 * i));
        f.v[i] = std::bit_cast<float>(get_u32(b.data() + 16 + 8 * i));
    }
    return f;
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels) {
    std::ostringstream s;
    s << "frame_index,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) s << i << ',' << labels[i] << '\n';
    write_text(path, s.str());
}

std::vector<int> read_labels_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line) || line.rfind("frame_index,label", 0) != 0)
        throw FormatError(FormatError::Code::Malformed, path.string() + ": missing header");
    std::vector<int> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw FormatError(FormatError::Code::Malformed, path.string() + ": bad row");
        const std::size_t idx = std::stoul(line.substr(0, comma));
        if (idx != out.size()) throw FormatError(FormatError::Code::Malformed, path.string() + ": rows out of order");
        const int label = std::stoi(line.substr(comma + 1));
        if (label != 0 && label != 1) throw FormatError(FormatError::Code::Malformed, path.string() + ": label not 0/1");
        out.push_back(label);
    }
    return out;
}

}  // namespace bglstm

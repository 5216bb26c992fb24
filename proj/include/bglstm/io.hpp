#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bglstm/flow.hpp"

namespace bglstm {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255). Pixels are rounded to the nearest 1/255.
void write_pgm(const std::filesystem::path& path, const GrayFrame& frame);
GrayFrame read_pgm(const std::filesystem::path& path);

// "FLO1", u32 LE width, u32 LE height, then row-major interleaved (u, v) as
// f32 LE.
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);

// frame_index,label
void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<int> read_labels_csv(const std::filesystem::path& path);

}  // namespace bglstm

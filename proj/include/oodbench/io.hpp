#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "oodbench/image.hpp"

namespace oodbench::io {

using ordered_json = nlohmann::ordered_json;

/// Raw little-endian float32 blob, row-major for images.
void write_f32_blob(const std::vector<double>& values, const std::filesystem::path& path);
std::vector<double> read_f32_blob(const std::filesystem::path& path);

/// Writes <stem>.f32 plus a <stem>.json sidecar carrying the dimensions.
void save_image_f32(const Image2D& im, const std::filesystem::path& stem);

/// Loads an image from <stem>.f32 / <stem>.json. Accepts either the stem or
/// the .f32 path itself.
Image2D load_image_f32(const std::filesystem::path& path);

/// Binary PGM (P5) with maxval 65535, most significant byte first.
/// Values are clamped to [0, 1] before quantization.
void save_pgm16(const Image2D& im, const std::filesystem::path& path);

/// Reads binary PGM with 8-bit or 16-bit samples; values scaled to [0, 1].
Image2D load_pgm(const std::filesystem::path& path);

void write_json_file(const ordered_json& j, const std::filesystem::path& path);
ordered_json read_json_file(const std::filesystem::path& path);

/// Writes text exactly as given (no trailing-newline edits).
void write_text_file(const std::string& text, const std::filesystem::path& path);

}  // namespace oodbench::io

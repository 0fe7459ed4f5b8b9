#pragma once

#include <cstdint>
#include <string>
#include <vector>

// 8-bit grayscale PNG read/write (libpng). Anything that is not exactly
// 8-bit grayscale is rejected on read.

namespace spf {

void write_gray_png(const std::string& path, int height, int width,
                    const std::vector<std::uint8_t>& pixels);

std::vector<std::uint8_t> read_gray_png(const std::string& path, int& height, int& width);

// Cheap header sniff: dimensions and format check without a full decode.
void probe_gray_png(const std::string& path, int& height, int& width);

}  // namespace spf

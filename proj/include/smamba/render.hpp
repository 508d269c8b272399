#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>

namespace smamba {

// Class k (1-based) is drawn with kPalette[(k - 1) % 16]; class 0 is black.
inline constexpr std::array<std::array<std::uint8_t, 3>, 16> kPalette = {{
    {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},
    {245, 130, 48},  {145, 30, 180},  {70, 240, 240},  {240, 50, 230},
    {210, 245, 60},  {250, 190, 212}, {0, 128, 128},   {220, 190, 255},
    {170, 110, 40},  {255, 250, 200}, {128, 0, 0},     {170, 255, 195},
}};

// Binary PPM (P6) class map, row-major classes of size height * width.
void write_class_map_ppm(const std::filesystem::path& path, std::size_t height, std::size_t width,
                         std::span<const std::uint16_t> classes);

}  // namespace smamba

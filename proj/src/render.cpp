#include "smamba/render.hpp"

#include <fstream>
#include <string>

#include "smamba/error.hpp"

namespace smamba {

void write_class_map_ppm(const std::filesystem::path& path, std::size_t height, std::size_t width,
                         std::span<const std::uint16_t> classes) {
  if (classes.size() != height * width) {
    throw DimensionError("class map: " + std::to_string(classes.size()) + " entries for " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << width << ' ' << height << "\n255\n";
  for (auto k : classes) {
    const std::array<std::uint8_t, 3> black{0, 0, 0};
    const auto& rgb = k == 0 ? black : kPalette[(k - 1u) % kPalette.size()];
    out.write(reinterpret_cast<const char*>(rgb.data()), 3);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace smamba

#include "langdepth/rng.hpp"

#include <fstream>
#include <iterator>
#include <limits>

#include "langdepth/binary_io.hpp"

namespace langdepth {

double Rng::uniform01() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

float Rng::uniform01_f32() {
  return static_cast<float>(next() >> 40) * 0x1.0p-24f;
}

std::size_t Rng::below(std::size_t n) {
  if (n <= 1) return 0;
  // Smallest all-ones mask covering n - 1, then reject out-of-range draws.
  std::uint64_t bound = n - 1;
  std::uint64_t mask = bound;
  mask |= mask >> 1;
  mask |= mask >> 2;
  mask |= mask >> 4;
  mask |= mask >> 8;
  mask |= mask >> 16;
  mask |= mask >> 32;
  for (;;) {
    std::uint64_t v = next() & mask;
    if (v <= bound) return static_cast<std::size_t>(v);
  }
}

namespace io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace io
}  // namespace langdepth

#include "aeromatch/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace aeromatch {

namespace {

[[noreturn]] void bad(const std::string& name, const std::string& why) {
  throw FormatViolation("ppm '" + name + "': " + why);
}

}  // namespace

std::vector<unsigned char> encode_ppm(const Image& img) {
  char header[64];
  const int hn = std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n",
                               img.width, img.height);
  std::vector<unsigned char> out;
  out.reserve(static_cast<size_t>(hn) + img.pixel_count() * 3);
  out.insert(out.end(), header, header + hn);
  const size_t np = img.pixel_count();
  for (size_t p = 0; p < np; ++p)
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(img.data[static_cast<size_t>(c) * np + p], 0.0, 1.0);
      out.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  return out;
}

Image decode_ppm(const std::vector<unsigned char>& bytes, const std::string& name) {
  size_t pos = 0;
  auto expect = [&](char ch, const char* what) {
    if (pos >= bytes.size() || static_cast<char>(bytes[pos]) != ch)
      bad(name, std::string("expected ") + what);
    ++pos;
  };
  expect('P', "magic 'P6'");
  expect('6', "magic 'P6'");
  expect('\n', "newline after magic");
  auto read_int = [&](char terminator, const char* what) {
    long v = 0;
    size_t digits = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos] - '0');
      ++pos;
      ++digits;
      if (v > 1 << 20) bad(name, std::string(what) + " out of range");
    }
    if (digits == 0) bad(name, std::string("missing ") + what);
    if (pos >= bytes.size() || static_cast<char>(bytes[pos]) != terminator)
      bad(name, std::string("bad separator after ") + what);
    ++pos;
    return static_cast<int>(v);
  };
  const int w = read_int(' ', "width");
  const int h = read_int('\n', "height");
  if (w <= 0 || h <= 0) bad(name, "non-positive extents");
  const int maxval = read_int('\n', "maxval");
  if (maxval != 255) bad(name, "maxval must be 255");
  const size_t need = static_cast<size_t>(w) * h * 3;
  if (bytes.size() - pos != need)
    bad(name, "payload is " + std::to_string(bytes.size() - pos) + " bytes, need " +
                  std::to_string(need));
  Image img = Image::filled(h, w, 0.0);
  const size_t np = img.pixel_count();
  for (size_t p = 0; p < np; ++p)
    for (int c = 0; c < 3; ++c)
      img.data[static_cast<size_t>(c) * np + p] =
          static_cast<double>(bytes[pos + p * 3 + c]) / 255.0;
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  const auto bytes = encode_ppm(img);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to '" + path.string() + "'");
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  return decode_ppm(bytes, path.string());
}

}  // namespace aeromatch

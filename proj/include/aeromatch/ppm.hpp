#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aeromatch/image.hpp"

namespace aeromatch {

// Binary PPM, exactly: ASCII header "P6\n<w> <h>\n255\n" followed by
// w*h*3 bytes of row-major interleaved RGB.

std::vector<unsigned char> encode_ppm(const Image& img);
Image decode_ppm(const std::vector<unsigned char>& bytes,
                 const std::string& name);  // FormatViolation names `name`

void write_ppm(const std::filesystem::path& path, const Image& img);  // IoError
Image read_ppm(const std::filesystem::path& path);  // IoError / FormatViolation

}  // namespace aeromatch

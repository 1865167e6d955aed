#ifndef MATTE_IMAGE_IO_HPP
#define MATTE_IMAGE_IO_HPP

// Binary PGM (P5) and PPM (P6) I/O, 8-bit and 16-bit. Pixel values are
// scaled to [0,1] floats; alpha mattes are single-channel PGM.

#include <string>
#include <vector>

namespace matte {

struct Image {
    int h = 0, w = 0, channels = 0;
    std::vector<float> data;  // h*w*channels, row-major, values in [0,1]
};

Image read_image(const std::string& path);

void write_pgm(const std::string& path, const std::vector<float>& gray, int h, int w,
               int bits = 16);
void write_ppm(const std::string& path, const std::vector<float>& rgb, int h, int w);

}  // namespace matte

#endif  // MATTE_IMAGE_IO_HPP

#include "matte/image_io.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace matte {

namespace {

int next_token(std::istream& in) {
    // skips whitespace and '#' comments per the netpbm header grammar
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v;
    if (!(in >> v)) throw std::runtime_error("image: malformed netpbm header");
    return v;
}

}  // namespace

Image read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("image: cannot open '" + path + "'");
    char magic[2];
    in.read(magic, 2);
    int channels;
    if (magic[0] == 'P' && magic[1] == '5')
        channels = 1;
    else if (magic[0] == 'P' && magic[1] == '6')
        channels = 3;
    else
        throw std::runtime_error("image: '" + path + "' is not binary PGM/PPM");
    Image img;
    img.channels = channels;
    img.w = next_token(in);
    img.h = next_token(in);
    int maxval = next_token(in);
    if (maxval <= 0 || maxval > 65535) throw std::runtime_error("image: bad maxval");
    in.get();  // single whitespace after maxval
    std::size_t n = std::size_t(img.h) * img.w * channels;
    img.data.resize(n);
    if (maxval < 256) {
        std::vector<std::uint8_t> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
        if (!in) throw std::runtime_error("image: truncated pixel data in '" + path + "'");
        for (std::size_t i = 0; i < n; ++i) img.data[i] = raw[i] / float(maxval);
    } else {
        std::vector<std::uint8_t> raw(n * 2);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 2));
        if (!in) throw std::runtime_error("image: truncated pixel data in '" + path + "'");
        for (std::size_t i = 0; i < n; ++i) {
            // network byte order, most significant first
            int v = (int(raw[2 * i]) << 8) | raw[2 * i + 1];
            img.data[i] = v / float(maxval);
        }
    }
    return img;
}

void write_pgm(const std::string& path, const std::vector<float>& gray, int h, int w, int bits) {
    if (gray.size() != std::size_t(h) * w) throw std::invalid_argument("write_pgm: size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("image: cannot write '" + path + "'");
    int maxval = bits <= 8 ? 255 : 65535;
    out << "P5\n" << w << " " << h << "\n" << maxval << "\n";
    for (float v : gray) {
        int q = static_cast<int>(std::clamp(v, 0.0f, 1.0f) * maxval + 0.5f);
        if (maxval == 255) {
            out.put(static_cast<char>(q));
        } else {
            out.put(static_cast<char>(q >> 8));
            out.put(static_cast<char>(q & 0xff));
        }
    }
}

void write_ppm(const std::string& path, const std::vector<float>& rgb, int h, int w) {
    if (rgb.size() != std::size_t(h) * w * 3) throw std::invalid_argument("write_ppm: size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("image: cannot write '" + path + "'");
    out << "P6\n" << w << " " << h << "\n255\n";
    for (float v : rgb)
        out.put(static_cast<char>(static_cast<int>(std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f)));
}

}  // namespace matte

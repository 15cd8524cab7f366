#pragma once

#include <cmath>
#include <fstream>
#include <string>

#include "dvrm/common.hpp"
#include "dvrm/image.hpp"

namespace dvrm {

// binary 8-bit PGM (P5); pixels are [0,1] doubles, stored as round(p*255)
inline void write_pgm(const std::string& path, const Image& im) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << "P5\n" << im.w << " " << im.h << "\n255\n";
    for (double p : im.pix) {
        double c = std::clamp(p, 0.0, 1.0);
        unsigned char b = (unsigned char)std::lround(c * 255.0);
        f.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!f) throw DataError("write to '" + path + "' failed");
}

inline Image read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "'");
    std::string magic;
    f >> magic;
    if (magic != "P5") throw DataError("'" + path + "': not a binary PGM (magic '" + magic + "')");
    std::size_t w = 0, h = 0;
    int maxv = 0;
    f >> w >> h >> maxv;
    if (!f || w == 0 || h == 0) throw DataError("'" + path + "': malformed PGM header");
    if (maxv != 255) throw DataError("'" + path + "': unsupported maxval " + std::to_string(maxv));
    f.get(); // single whitespace after maxval
    Image im(h, w);
    for (std::size_t i = 0; i < im.size(); ++i) {
        int b = f.get();
        if (b == EOF) throw DataError("'" + path + "': truncated PGM payload");
        im.pix[i] = double(b) / 255.0;
    }
    return im;
}

} // namespace dvrm

#pragma once

// Binary PGM (P5) / PPM (P6) images with maxval 255, and the mapping between 8-bit
// pixels and model space: x / 127.5 - 1 on the way in, inverse plus clamp on the way out.

#include "hdm/error.hpp"
#include "hdm/forward_process.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace hdm {

struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;  // interleaved, row-major
};

inline double to_model(std::uint8_t v) { return double(v) / 127.5 - 1.0; }

inline std::uint8_t to_display(double x) {
    const double v = std::round((x + 1.0) * 127.5);
    return std::uint8_t(std::clamp(v, 0.0, 255.0));
}

inline ImageField to_field(const Image8& img) {
    const GridShape shape{img.height, img.width};
    validate(shape);
    ImageField f = ImageField::zeros(shape, img.channels);
    for (int i = 0; i < img.height; ++i)
        for (int j = 0; j < img.width; ++j)
            for (int c = 0; c < img.channels; ++c)
                f.at(c, i, j) = to_model(img.pixels[(std::size_t(i) * img.width + j) * img.channels + c]);
    return f;
}

inline Image8 to_image(const ImageField& f) {
    Image8 img;
    img.height = f.shape.rows;
    img.width = f.shape.cols;
    img.channels = f.channels();
    img.pixels.resize(std::size_t(img.width) * img.height * img.channels);
    for (int i = 0; i < img.height; ++i)
        for (int j = 0; j < img.width; ++j)
            for (int c = 0; c < img.channels; ++c)
                img.pixels[(std::size_t(i) * img.width + j) * img.channels + c] = to_display(f.at(c, i, j));
    return img;
}

namespace detail {

inline std::string next_pnm_token(std::istream& in) {
    std::string token;
    char ch = 0;
    while (in.get(ch)) {
        if (ch == '#') {
            std::string skip;
            std::getline(in, skip);
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            token.push_back(ch);
            break;
        }
    }
    while (in.get(ch) && !std::isspace(static_cast<unsigned char>(ch))) token.push_back(ch);
    return token;
}

}  // namespace detail

inline Image8 read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), ErrorKind::Io, "cannot open " + path);
    const std::string magic = detail::next_pnm_token(in);
    require(magic == "P5" || magic == "P6", ErrorKind::Io, path + ": only binary PGM (P5) and PPM (P6) are supported");
    Image8 img;
    img.channels = magic == "P5" ? 1 : 3;
    try {
        img.width = std::stoi(detail::next_pnm_token(in));
        img.height = std::stoi(detail::next_pnm_token(in));
        const int maxval = std::stoi(detail::next_pnm_token(in));
        require(maxval == 255, ErrorKind::Io, path + ": maxval must be 255");
    } catch (const std::logic_error&) {
        fail(ErrorKind::Io, path + ": malformed header");
    }
    require(img.width > 0 && img.height > 0, ErrorKind::Io, path + ": bad dimensions");
    img.pixels.resize(std::size_t(img.width) * img.height * img.channels);
    in.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
    require(in.gcount() == std::streamsize(img.pixels.size()), ErrorKind::Io, path + ": truncated pixel data");
    return img;
}

inline void write_pnm(const std::string& path, const Image8& img) {
    require(img.channels == 1 || img.channels == 3, ErrorKind::Io, "PNM output needs 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    require(bool(out), ErrorKind::Io, "cannot open " + path + " for writing");
    out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
    require(bool(out), ErrorKind::Io, "failed writing " + path);
}

}  // namespace hdm

#include "ict/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ict/errors.hpp"

namespace ict {

namespace {

// Reads one whitespace/comment-delimited token from a PNM header.
std::string next_token(std::istream& in, const std::string& path) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw IoError("truncated PNM header: " + path);
    return tok;
}

void parse_header(std::istream& in, const std::string& path, const char* magic, int& w, int& h) {
    if (next_token(in, path) != magic)
        throw IoError("not a " + std::string(magic) + " file: " + path);
    w = std::stoi(next_token(in, path));
    h = std::stoi(next_token(in, path));
    const int maxval = std::stoi(next_token(in, path));
    if (w <= 0 || h <= 0 || maxval != 255)
        throw IoError("unsupported PNM geometry in " + path);
}

}  // namespace

void write_ppm(const Image8& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw IoError("write failed: " + path);
}

Image8 read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    int w = 0, h = 0;
    parse_header(in, path, "P6", w, h);
    Image8 img(w, h);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw IoError("truncated pixel data: " + path);
    return img;
}

void write_pgm(const MaskImage& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<std::uint8_t> bytes(mask.values.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        double v = mask.values[i];
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

MaskImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    int w = 0, h = 0;
    parse_header(in, path, "P5", w, h);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw IoError("truncated pixel data: " + path);
    MaskImage mask(w, h);
    for (std::size_t i = 0; i < bytes.size(); ++i) mask.values[i] = bytes[i] / 255.0;
    return mask;
}

}  // namespace ict

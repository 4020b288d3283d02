#include "dmlab/image_io.hpp"

#include "dmlab/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace dmlab {

namespace {

// Reads one whitespace/comment-delimited header token.
std::string header_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (in && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (in && c != '\n') c = in.get();
        }
        c = in.get();
    }
    while (in && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    // The single whitespace byte after the last header field has been consumed.
    return tok;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
    const auto tok = header_token(in);
    try {
        return std::stoi(tok);
    } catch (const std::exception&) {
        throw IoError("malformed netpbm header in " + path.string());
    }
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::uint16_t to_u16(double v) {
    return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    auto out = open_out(path);
    out << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
    std::string buf;
    buf.reserve(img.size() * 2);
    for (double v : img.pixels()) {
        const auto q = to_u16(v);
        buf.push_back(static_cast<char>(q >> 8));
        buf.push_back(static_cast<char>(q & 0xFF));
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
    auto in = open_in(path);
    if (header_token(in) != "P5") throw IoError("not a binary PGM (P5): " + path.string());
    const int w = header_int(in, path);
    const int h = header_int(in, path);
    const int maxval = header_int(in, path);
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
        throw IoError("unsupported PGM header in " + path.string());
    }
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    std::string raw(n * bytes_per, '\0');
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw IoError("truncated PGM data in " + path.string());
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        unsigned q = static_cast<unsigned char>(raw[i * bytes_per]);
        if (bytes_per == 2) q = (q << 8) | static_cast<unsigned char>(raw[i * 2 + 1]);
        values[i] = static_cast<double>(q) / maxval;
    }
    return GrayImage(w, h, std::move(values));
}

void write_pbm(const std::filesystem::path& path, const BinaryMask& mask) {
    auto out = open_out(path);
    out << "P4\n" << mask.width() << ' ' << mask.height() << '\n';
    const int row_bytes = (mask.width() + 7) / 8;
    std::string row(static_cast<std::size_t>(row_bytes), '\0');
    for (int y = 0; y < mask.height(); ++y) {
        std::fill(row.begin(), row.end(), '\0');
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.at(x, y)) row[static_cast<std::size_t>(x / 8)] |= static_cast<char>(0x80 >> (x % 8));
        }
        out.write(row.data(), row_bytes);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

BinaryMask read_pbm(const std::filesystem::path& path) {
    auto in = open_in(path);
    if (header_token(in) != "P4") throw IoError("not a binary PBM (P4): " + path.string());
    const int w = header_int(in, path);
    const int h = header_int(in, path);
    if (w < 1 || h < 1) throw IoError("unsupported PBM header in " + path.string());
    const int row_bytes = (w + 7) / 8;
    BinaryMask mask(w, h);
    std::string row(static_cast<std::size_t>(row_bytes), '\0');
    for (int y = 0; y < h; ++y) {
        in.read(row.data(), row_bytes);
        if (in.gcount() != row_bytes) throw IoError("truncated PBM data in " + path.string());
        for (int x = 0; x < w; ++x) {
            const auto byte = static_cast<unsigned char>(row[static_cast<std::size_t>(x / 8)]);
            mask.set(x, y, (byte >> (7 - x % 8)) & 1U);
        }
    }
    return mask;
}

void write_score_pgm(const std::filesystem::path& path, const ScoreMap& scores) {
    if (scores.values.empty()) throw InvalidParameter("empty score map");
    const auto [lo, hi] = std::minmax_element(scores.values.begin(), scores.values.end());
    const double span = *hi - *lo;
    std::vector<double> norm(scores.values.size(), 0.0);
    if (span > 0.0) {
        for (std::size_t i = 0; i < norm.size(); ++i) norm[i] = (scores.values[i] - *lo) / span;
    }
    write_pgm(path, GrayImage(scores.width, scores.height, std::move(norm)));
}

GrayImage quantize16(const GrayImage& img) {
    std::vector<double> v(img.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = to_u16(img[i]) / 65535.0;
    return GrayImage(img.width(), img.height(), std::move(v));
}

}  // namespace dmlab

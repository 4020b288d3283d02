#pragma once

#include "dmlab/image.hpp"

#include <filesystem>

namespace dmlab {

// Netpbm I/O. Images are written as binary 16-bit PGM (P5, maxval 65535,
// big-endian samples); 8-bit P5 files are accepted on read. Masks use P4.

void write_pgm(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm(const std::filesystem::path& path);

void write_pbm(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_pbm(const std::filesystem::path& path);

/// Score maps are min-max normalized into a 16-bit PGM for inspection.
void write_score_pgm(const std::filesystem::path& path, const ScoreMap& scores);

/// Round-trip quantization applied by write_pgm/read_pgm.
GrayImage quantize16(const GrayImage& img);

}  // namespace dmlab

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sleepstack {

/// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320).
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);
std::uint32_t crc32(const std::string& data);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// Shortest round-trip decimal form of a double ("17" not "17.000000").
std::string format_double(double v);
/// Fixed-precision decimal form, e.g. format_fixed(1.5, 3) == "1.500".
std::string format_fixed(double v, int decimals);
/// Strict double parse; the whole token must be consumed.
bool parse_double(const std::string& tok, double& out);
bool parse_i64(const std::string& tok, std::int64_t& out);

std::vector<std::string> split(const std::string& line, char sep);

/// Little-endian binary writer/reader for the weight file format.
struct ByteWriter {
    std::string bytes;
    void u8(std::uint8_t v) { bytes.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void f32(float v);
    void raw(const void* data, std::size_t len);
};

struct ByteReader {
    const std::string& bytes;
    std::size_t pos = 0;
    explicit ByteReader(const std::string& b) : bytes(b) {}
    bool eof() const { return pos >= bytes.size(); }
    std::size_t remaining() const { return bytes.size() - pos; }
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    float f32();
};

/// Run fn(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots so the schedule cannot change the outcome.
/// threads == 0 means hardware concurrency.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

} // namespace sleepstack

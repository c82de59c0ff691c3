#include "sleepstack/util.hpp"

#include "sleepstack/errors.hpp"

#include <array>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <thread>

namespace sleepstack {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedFile: return "MalformedFile";
        case ErrorCode::RangeViolation: return "RangeViolation";
        case ErrorCode::LabelMismatch: return "LabelMismatch";
        case ErrorCode::EmptyWindow: return "EmptyWindow";
        case ErrorCode::InsufficientBeats: return "InsufficientBeats";
        case ErrorCode::InsufficientHistory: return "InsufficientHistory";
        case ErrorCode::DegenerateFeature: return "DegenerateFeature";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
        case ErrorCode::TopologyMismatch: return "TopologyMismatch";
        case ErrorCode::FoldTooSmall: return "FoldTooSmall";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::BadModel: return "BadModel";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ArenaTooSmall: return "ArenaTooSmall";
        case ErrorCode::UsageError: return "UsageError";
    }
    return "Unknown";
}

ErrorCategory error_category(ErrorCode code) {
    switch (code) {
        case ErrorCode::UsageError:
            return ErrorCategory::Usage;
        case ErrorCode::ArenaTooSmall:
            return ErrorCategory::Gate;
        default:
            return ErrorCategory::Data;
    }
}

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t n = 0; n < 256; ++n) {
        std::uint32_t c = n;
        for (int k = 0; k < 8; ++k)
            c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
        table[n] = c;
    }
    return table;
}

} // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
    static const std::array<std::uint32_t, 256> table = make_crc_table();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i)
        c = table[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::uint32_t crc32(const std::string& data) {
    return crc32(data.data(), data.size());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open file: " + path);
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw Error(ErrorCode::IoError, "read failed: " + path);
    return contents;
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot create file: " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out)
        throw Error(ErrorCode::IoError, "write failed: " + path);
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int decimals) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return std::string(buf);
}

bool parse_double(const std::string& tok, double& out) {
    if (tok.empty()) return false;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

bool parse_i64(const std::string& tok, std::int64_t& out) {
    if (tok.empty()) return false;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

void ByteWriter::u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v & 0xFF));
    u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void ByteWriter::f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
}

void ByteWriter::raw(const void* data, std::size_t len) {
    bytes.append(static_cast<const char*>(data), len);
}

std::uint8_t ByteReader::u8() {
    if (pos >= bytes.size())
        throw Error(ErrorCode::ChecksumMismatch, "truncated file");
    return static_cast<std::uint8_t>(bytes[pos++]);
}

std::uint16_t ByteReader::u16() {
    const std::uint16_t lo = u8();
    const std::uint16_t hi = u8();
    return static_cast<std::uint16_t>(lo | (hi << 8));
}

std::uint32_t ByteReader::u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
}

float ByteReader::f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (threads == 0) threads = std::thread::hardware_concurrency();
    if (threads == 0) threads = 1;
    if (threads > n) threads = static_cast<unsigned>(n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace sleepstack

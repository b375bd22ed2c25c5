#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bessgnn::binio {

/// FNV-1a 64-bit.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Little-endian encoder into an in-memory buffer.
class Writer {
public:
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void str(std::string_view s); // u64 length + bytes
    void f64s(const std::vector<double>& v); // u64 count + values
    void raw(std::string_view bytes);

    const std::string& bytes() const noexcept { return buf_; }

private:
    std::string buf_;
};

/// Bounds-checked decoder; any overrun throws FormatError naming `what`.
class Reader {
public:
    Reader(std::string_view bytes, std::string what);

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string str();
    std::vector<double> f64s();
    std::string_view raw(std::size_t n);

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    void need(std::size_t n);
    std::string_view data_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace bessgnn::binio

#include "bessgnn/binio.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "bessgnn/errors.hpp"

namespace bessgnn::binio {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void Writer::u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

void Writer::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void Writer::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::str(std::string_view s) {
    u64(s.size());
    buf_.append(s);
}

void Writer::f64s(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
}

void Writer::raw(std::string_view bytes) { buf_.append(bytes); }

Reader::Reader(std::string_view bytes, std::string what) : data_(bytes), what_(std::move(what)) {}

void Reader::need(std::size_t n) {
    if (n > remaining()) {
        throw FormatError(what_ + ": truncated at byte " + std::to_string(pos_) + " (needed " + std::to_string(n) +
                          ", have " + std::to_string(remaining()) + ")");
    }
}

std::uint8_t Reader::u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t Reader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
}

std::uint64_t Reader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::str() {
    const auto n = u64();
    return std::string(raw(n));
}

std::vector<double> Reader::f64s() {
    const auto n = u64();
    need(n * 8);
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
}

std::string_view Reader::raw(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw FormatError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace bessgnn::binio

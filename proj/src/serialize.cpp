#include "trer/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>

#include "trer/errors.hpp"

namespace trer {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int bit = 0; bit < 8; ++bit) {
            c = (c & 1u) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
        }
        table[i] = c;
    }
    return table;
}

} // namespace

std::uint32_t crc32(std::span<const unsigned char> bytes, std::uint32_t seed) {
    static const auto table = make_crc_table();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (unsigned char b : bytes) {
        c = table[(c ^ b) & 0xFFu] ^ (c >> 8);
    }
    return c ^ 0xFFFFFFFFu;
}

void ByteWriter::u16(std::uint16_t v) {
    buf_.push_back(static_cast<unsigned char>(v & 0xFF));
    buf_.push_back(static_cast<unsigned char>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        buf_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
    }
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        buf_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
    }
}

void ByteWriter::f64(double v) {
    u64(std::bit_cast<std::uint64_t>(v));
}

void ByteWriter::bytes(std::span<const unsigned char> b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
}

void ByteWriter::str(const std::string& s) {
    buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open for writing: " + path.string());
    }
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    if (!out) {
        throw DataError("write failed: " + path.string());
    }
}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw DataError("cannot open for reading: " + path.string());
    }
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) {
        throw DataError("read failed: " + path.string());
    }
    return ByteReader(std::move(bytes));
}

void ByteReader::need(std::size_t n) const {
    if (pos_ + n > buf_.size()) {
        throw FormatError("truncated file: need " + std::to_string(n) +
                          " bytes at offset " + std::to_string(pos_) +
                          ", have " + std::to_string(buf_.size() - pos_));
    }
}

std::uint16_t ByteReader::u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_]) |
                      static_cast<std::uint16_t>(buf_[pos_ + 1]) << 8;
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
    }
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
    }
    pos_ += 8;
    return v;
}

double ByteReader::f64() {
    return std::bit_cast<double>(u64());
}

std::string ByteReader::str(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
    pos_ += len;
    return s;
}

void ByteReader::f64_block(std::span<double> out) {
    need(out.size() * 8);
    for (auto& v : out) {
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) {
            bits = (bits << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
        }
        pos_ += 8;
        v = std::bit_cast<double>(bits);
    }
}

} // namespace trer

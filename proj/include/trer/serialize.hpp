#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace trer {

// CRC-32 (IEEE 802.3, reflected polynomial 0xEDB88320).
std::uint32_t crc32(std::span<const unsigned char> bytes,
                    std::uint32_t seed = 0);

// Little-endian binary writer accumulating into a byte buffer so the whole
// file can be checksummed and written at once.
class ByteWriter {
public:
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void bytes(std::span<const unsigned char> b);
    void str(const std::string& s); // raw bytes, no length prefix

    const std::vector<unsigned char>& buffer() const { return buf_; }
    std::size_t size() const { return buf_.size(); }

    void write_file(const std::filesystem::path& path) const;

private:
    std::vector<unsigned char> buf_;
};

// Little-endian reader over an in-memory file image. Every accessor throws
// FormatError with the current byte offset on truncation.
class ByteReader {
public:
    explicit ByteReader(std::vector<unsigned char> bytes)
        : buf_(std::move(bytes)) {}

    static ByteReader from_file(const std::filesystem::path& path);

    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string str(std::size_t len);
    void f64_block(std::span<double> out);

    std::size_t offset() const { return pos_; }
    std::size_t size() const { return buf_.size(); }
    std::size_t remaining() const { return buf_.size() - pos_; }
    std::span<const unsigned char> all() const { return buf_; }
    std::span<const unsigned char> consumed() const {
        return {buf_.data(), pos_};
    }

private:
    void need(std::size_t n) const;

    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
};

} // namespace trer

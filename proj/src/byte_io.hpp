// SPDX-License-Identifier: Apache-2.0

#pragma once

// Little-endian primitives shared by the tensor and report formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace unncsi::detail {

class ByteWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void text(const std::string &s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t> take() { return std::move(buf_); }
    const std::vector<std::uint8_t> &buffer() const { return buf_; }

  private:
    void put(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i)
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    std::vector<std::uint8_t> buf_;
};

class ByteReader {
  public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    float f32() { return std::bit_cast<float>(u32()); }

    std::span<const std::uint8_t> bytes(std::size_t n)
    {
        need(n);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::string text(std::size_t n)
    {
        auto b = bytes(n);
        return std::string(b.begin(), b.end());
    }

    std::size_t remaining() const { return data_.size() - pos_; }

  private:
    void need(std::size_t n) const
    {
        if (data_.size() - pos_ < n)
            throw std::runtime_error("unexpected end of data");
    }

    std::uint64_t get(int n)
    {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
            v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string &path);
void write_file_atomic(const std::string &path, std::span<const std::uint8_t> bytes);

} // namespace unncsi::detail

#ifndef MSLSTM_BINIO_HPP
#define MSLSTM_BINIO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mslstm/errors.hpp"

namespace mslstm {

/// Little-endian reader over a fully loaded buffer. Every accessor checks
/// the remaining length and reports the failing byte offset.
class ByteReader {
 public:
  ByteReader(std::vector<unsigned char> buf, std::string name)
      : buf_(std::move(buf)), name_(std::move(name)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }
  bool at_end() const { return pos_ == buf_.size(); }

  void require(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw FormatError(name_ + ": truncated while reading " + what, pos_);
    }
  }

  void expect_magic(const char tag[4]) {
    require(4, "magic");
    if (std::memcmp(buf_.data() + pos_, tag, 4) != 0) {
      throw FormatError(name_ + ": bad magic, expected '" +
                            std::string(tag, 4) + "'",
                        pos_);
    }
    pos_ += 4;
  }

  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  float f32(const char* what) {
    return std::bit_cast<float>(u32(what));
  }

  double f64(const char* what) {
    require(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  std::string str(std::size_t n, const char* what) {
    require(n, what);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  const std::string& name() const { return name_; }

 private:
  std::vector<unsigned char> buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

/// Little-endian writer into a growable buffer.
class ByteWriter {
 public:
  void magic(const char tag[4]) { buf_.insert(buf_.end(), tag, tag + 4); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      buf_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
    }
  }

  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  void f64(double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      buf_.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
    }
  }

  void str(const std::string& s) {
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  const std::vector<unsigned char>& buffer() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path + "' for reading");
  }
  std::vector<unsigned char> buf(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw IoError("read failed for '" + path + "'");
  }
  return buf;
}

inline void write_file_bytes(const std::string& path,
                             const std::vector<unsigned char>& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) {
    throw IoError("write failed for '" + path + "'");
  }
}

}  // namespace mslstm

#endif

/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>

#include "offense/errors.hpp"
#include "offense/hash.hpp"

namespace offense {

// Writes `content` to a sibling temp file and renames it over `path`.
// Throws DataError on I/O failure.
void write_file_atomic(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);

// Little-endian writer that checksums everything it emits. finish() appends
// the FNV-1a 64 of all prior bytes.
class ChecksumWriter {
 public:
  explicit ChecksumWriter(const std::string& path);

  void bytes(const void* data, std::size_t size);
  void bytes(std::string_view s) { bytes(s.data(), s.size()); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void i32(std::int32_t v) { put_le(static_cast<std::uint32_t>(v)); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

  // Writes the trailing checksum and closes the file. Returns the checksum.
  std::uint64_t finish();

 private:
  template <typename U>
  void put_le(U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof(U));
  }

  std::string path_;
  std::ofstream out_;
  Fnv1a64 hash_;
};

// Reader over an in-memory file image. The constructor verifies the trailing
// checksum before any field is decoded, so a corrupt file never yields a
// partially-populated model.
class ChecksumReader {
 public:
  // Loads `path`; throws ModelFormatError / ChecksumMismatch.
  static ChecksumReader open(const std::string& path);
  explicit ChecksumReader(std::string image);

  void bytes(void* out, std::size_t size);
  std::string string(std::size_t size);
  std::uint8_t u8() { return get_le<std::uint8_t>(); }
  std::uint16_t u16() { return get_le<std::uint16_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(get_le<std::uint32_t>()); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

  std::size_t remaining() const { return payload_end_ - pos_; }
  std::uint64_t checksum() const { return checksum_; }

  // Throws unless every payload byte was consumed.
  void expect_end() const;

 private:
  template <typename U>
  U get_le() {
    unsigned char buf[sizeof(U)];
    bytes(buf, sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
    return v;
  }

  std::string image_;
  std::size_t pos_ = 0;
  std::size_t payload_end_ = 0;
  std::uint64_t checksum_ = 0;
};

}  // namespace offense

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

#include "offense/binary_io.hpp"

#include <cstdio>
#include <filesystem>
#include <iterator>
#include <sstream>

namespace offense {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  Fnv1a64 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.value();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw DataError("write failed: " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot rename " + tmp + " to " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ChecksumWriter::ChecksumWriter(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw DataError("cannot open " + path + " for writing");
}

void ChecksumWriter::bytes(const void* data, std::size_t size) {
  hash_.update(data, size);
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

std::uint64_t ChecksumWriter::finish() {
  const std::uint64_t sum = hash_.value();
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(sum >> (8 * i));
  out_.write(reinterpret_cast<const char*>(buf), 8);
  out_.close();
  if (!out_) throw DataError("write failed: " + path_);
  return sum;
}

ChecksumReader ChecksumReader::open(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError("cannot open " + path);
  std::string image((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ChecksumReader(std::move(image));
}

ChecksumReader::ChecksumReader(std::string image) : image_(std::move(image)) {
  if (image_.size() < 8) throw ModelFormatError("file too short for checksum");
  payload_end_ = image_.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(image_[payload_end_ + i])) << (8 * i);
  Fnv1a64 h;
  h.update(image_.data(), payload_end_);
  if (h.value() != stored)
    throw ChecksumMismatch("checksum mismatch: stored " + hex64(stored) + ", computed " + hex64(h.value()));
  checksum_ = stored;
}

void ChecksumReader::bytes(void* out, std::size_t size) {
  if (size > remaining()) throw ModelFormatError("truncated file");
  std::memcpy(out, image_.data() + pos_, size);
  pos_ += size;
}

std::string ChecksumReader::string(std::size_t size) {
  if (size > remaining()) throw ModelFormatError("truncated file");
  std::string s = image_.substr(pos_, size);
  pos_ += size;
  return s;
}

void ChecksumReader::expect_end() const {
  if (pos_ != payload_end_) throw ModelFormatError("trailing bytes after payload");
}

}  // namespace offense

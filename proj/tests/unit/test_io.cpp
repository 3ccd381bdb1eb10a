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

#include <sstream>

#include "doctest.h"
#include "offense/binary_io.hpp"
#include "offense/csv.hpp"
#include "offense/errors.hpp"
#include "offense/hash.hpp"
#include "offense/rng.hpp"
#include "support.hpp"

using namespace offense;

TEST_CASE("fnv1a64 matches published vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
  Fnv1a64 h;
  h.update("foo", 3);
  h.update("bar", 3);
  CHECK(h.value() == fnv1a64("foobar"));
}

TEST_CASE("derive_seed separates labels and indices") {
  CHECK(derive_seed(1, "ingest") == derive_seed(1, "ingest"));
  CHECK(derive_seed(1, "ingest") != derive_seed(1, "train-embedding"));
  CHECK(derive_seed(1, "ingest") != derive_seed(2, "ingest"));
  CHECK(derive_seed(5, std::uint64_t{0}) != derive_seed(5, std::uint64_t{1}));
}

TEST_CASE("rng below is in range and roughly uniform") {
  Rng rng(42);
  std::vector<int> bins(10, 0);
  for (int i = 0; i < 100000; ++i) {
    const auto v = rng.below(10);
    REQUIRE(v < 10);
    ++bins[v];
  }
  for (int b : bins) CHECK(std::abs(b - 10000) < 500);
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("rng uniform in [0,1) and normal has unit variance") {
  Rng rng(3);
  double sum = 0, sq = 0;
  constexpr int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(9);
  std::vector<int> v(1000);
  for (int i = 0; i < 1000; ++i) v[i] = i;
  rng.shuffle(std::span<int>(v));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 1000; ++i) CHECK(sorted[i] == i);
  CHECK(v != sorted);
}

TEST_CASE("csv escaping and reading round trip") {
  const std::vector<std::string> fields = {"plain", "has,comma", "has \"quote\"", "multi\nline", ""};
  const std::string text = csv_line(fields) + csv_line({"a", "b", "c", "d", "e"});
  std::istringstream in(text);
  CsvReader reader(in);
  auto first = reader.next();
  REQUIRE(first);
  CHECK(*first == fields);
  CHECK(reader.line() == 1);
  auto second = reader.next();
  REQUIRE(second);
  CHECK((*second)[4] == "e");
  CHECK(reader.line() == 3);
  CHECK_FALSE(reader.next());
}

TEST_CASE("csv reader rejects unterminated quotes") {
  std::istringstream in("a,\"open\n");
  CsvReader reader(in);
  CHECK_THROWS_AS(reader.next(), MalformedRow);
}

TEST_CASE("format_double is shortest round trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-0.0) == "0");
  CHECK(format_double(1.0) == "1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("checksum writer and reader round trip; corruption detected") {
  testing::TempDir dir;
  const std::string path = dir.file("blob.bin");
  {
    ChecksumWriter w(path);
    w.bytes(std::string_view("MAGIC"));
    w.u32(7);
    w.u64(1ull << 40);
    w.f32(1.5f);
    w.f64(-2.25);
    w.finish();
  }
  {
    auto r = ChecksumReader::open(path);
    CHECK(r.string(5) == "MAGIC");
    CHECK(r.u32() == 7);
    CHECK(r.u64() == (1ull << 40));
    CHECK(r.f32() == 1.5f);
    CHECK(r.f64() == -2.25);
    r.expect_end();
  }
  auto bytes = read_file(path);
  bytes[6] ^= 0x01;
  testing::write_text(path, bytes);
  CHECK_THROWS_AS(ChecksumReader::open(path), ChecksumMismatch);
  testing::write_text(path, bytes.substr(0, 4));
  CHECK_THROWS_AS(ChecksumReader::open(path), ModelFormatError);
}

TEST_CASE("write_file_atomic replaces content and leaves no temp file") {
  testing::TempDir dir;
  const std::string path = dir.file("out.txt");
  write_file_atomic(path, "one");
  write_file_atomic(path, "two");
  CHECK(read_file(path) == "two");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  CHECK_THROWS_AS(write_file_atomic(dir.file("missing/dir/x"), "x"), DataError);
}

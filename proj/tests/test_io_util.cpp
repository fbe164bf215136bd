#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "spm/errors.hpp"
#include "spm/io_util.hpp"

namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "spm_io_tests";
  fs::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("crc32 known vector") {
  // "123456789" is the standard check value for this polynomial.
  CHECK(spm::crc32("123456789", 9) == 0xcbf43926u);
  CHECK(spm::crc32("", 0) == 0u);
}

TEST_CASE("binary writer/reader round trip") {
  const std::string path = temp_path("roundtrip.bin");
  spm::BinaryWriter w;
  w.bytes("TEST", 4);
  w.u8(200);
  w.u32(123456789u);
  w.u64(0x1122334455667788ull);
  w.f64(-0.125);
  w.str("hello");
  w.commit(path);

  spm::BinaryReader r(path, "TEST");
  CHECK(r.u8() == 200);
  CHECK(r.u32() == 123456789u);
  CHECK(r.u64() == 0x1122334455667788ull);
  CHECK(r.f64() == -0.125);
  CHECK(r.str() == "hello");
  CHECK(r.at_end());
}

TEST_CASE("corrupted and truncated files are rejected") {
  const std::string path = temp_path("corrupt.bin");
  spm::BinaryWriter w;
  w.bytes("TEST", 4);
  w.u32(42);
  w.commit(path);

  SUBCASE("bit flip") {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(5);
    f.put('\x7f');
    f.close();
    CHECK_THROWS_AS(spm::BinaryReader(path, "TEST"), spm::data_error);
  }
  SUBCASE("truncation") {
    const std::string data = spm::read_text_file(path);
    spm::write_text_file(path, data.substr(0, data.size() - 3));
    CHECK_THROWS_AS(spm::BinaryReader(path, "TEST"), spm::data_error);
  }
  SUBCASE("wrong magic") {
    CHECK_THROWS_AS(spm::BinaryReader(path, "ELSE"), spm::data_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(spm::BinaryReader(temp_path("nope.bin"), "TEST"),
                    spm::data_error);
  }
}

TEST_CASE("reads past the payload throw instead of consuming the crc") {
  const std::string path = temp_path("short.bin");
  spm::BinaryWriter w;
  w.bytes("TEST", 4);
  w.u32(1);
  w.commit(path);
  spm::BinaryReader r(path, "TEST");
  CHECK(r.u32() == 1);
  CHECK_THROWS_AS(r.u32(), spm::data_error);
}

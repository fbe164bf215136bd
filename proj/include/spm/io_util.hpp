#ifndef SPM_IO_UTIL_HPP
#define SPM_IO_UTIL_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace spm {

// All binary artifacts share one envelope: a 4-byte ASCII magic, a u32
// format version, format-specific payload, and a trailing CRC32 computed
// over every preceding byte. Integers are little-endian; doubles are
// IEEE-754 bit patterns stored little-endian.

std::uint32_t crc32(const void* data, std::size_t len,
                    std::uint32_t seed = 0);

class BinaryWriter {
 public:
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void bytes(const void* data, std::size_t len);
  void str(std::string_view s);  // u32 length prefix + raw bytes

  // Appends the CRC32 of everything buffered so far and writes the file
  // via a temp-file rename, so readers never observe a partial artifact.
  void commit(const std::string& path) const;

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  // Loads the whole file, verifies the trailing CRC32 and the magic.
  // Throws data_error on I/O failure, truncation, checksum or magic
  // mismatch; nothing partial escapes.
  BinaryReader(const std::string& path, std::string_view magic);

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  void bytes(void* out, std::size_t len);

  bool at_end() const { return pos_ == payload_end_; }

 private:
  void need(std::size_t n) const;
  std::string data_;
  std::size_t pos_ = 0;
  std::size_t payload_end_ = 0;
  std::string path_;
};

// Tiny CSV helpers; fields never contain commas in any of our sidecars.
void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);
std::vector<std::string> split(std::string_view line, char sep);

}  // namespace spm

#endif

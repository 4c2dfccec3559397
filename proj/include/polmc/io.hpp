#pragma once

// Little-endian binary helpers shared by the grid, dataset and model formats.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace polmc::io {

class BinaryWriter {
public:
  explicit BinaryWriter(std::ostream &out) : out_(out) {}

  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64s(const std::vector<double> &v);
  /// u32 length followed by the bytes.
  void str(const std::string &s);

private:
  std::ostream &out_;
};

/// Reads with offset tracking; any short read or bad value throws FormatError.
class BinaryReader {
public:
  explicit BinaryReader(std::istream &in) : in_(in) {}

  void expect_magic(std::string_view tag);
  /// Reads the version word and rejects anything other than `supported`.
  std::uint32_t expect_version(std::uint32_t supported);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::vector<double> f64s(std::size_t n);
  std::string str(std::size_t max_length = 4096);

  std::size_t offset() const { return offset_; }
  [[noreturn]] void fail(const std::string &what) const;

private:
  void raw(void *dst, std::size_t n);

  std::istream &in_;
  std::size_t offset_ = 0;
};

/// Writes through a temporary sibling file and renames it into place, so an
/// interrupted write never leaves a partial file at `path`.
void atomic_write(const std::string &path, const std::function<void(std::ostream &)> &body,
                  bool binary = true);

} // namespace polmc::io

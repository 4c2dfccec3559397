#include "polmc/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "polmc/error.hpp"

namespace polmc::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void BinaryWriter::magic(std::string_view tag) { out_.write(tag.data(), tag.size()); }

void BinaryWriter::u32(std::uint32_t v) { out_.write(reinterpret_cast<const char *>(&v), 4); }

void BinaryWriter::u64(std::uint64_t v) { out_.write(reinterpret_cast<const char *>(&v), 8); }

void BinaryWriter::f64(double v) { out_.write(reinterpret_cast<const char *>(&v), 8); }

void BinaryWriter::f64s(const std::vector<double> &v) {
  out_.write(reinterpret_cast<const char *>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void BinaryWriter::str(const std::string &s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryReader::raw(void *dst, std::size_t n) {
  in_.read(static_cast<char *>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    fail("unexpected end of file");
  offset_ += n;
}

void BinaryReader::fail(const std::string &what) const { throw FormatError(what, offset_); }

void BinaryReader::expect_magic(std::string_view tag) {
  std::string got(tag.size(), '\0');
  const std::size_t at = offset_;
  raw(got.data(), got.size());
  if (got != tag)
    throw FormatError("bad magic: expected \"" + std::string(tag) + "\"", at);
}

std::uint32_t BinaryReader::expect_version(std::uint32_t supported) {
  const std::size_t at = offset_;
  const std::uint32_t v = u32();
  if (v != supported)
    throw FormatError("unsupported format version " + std::to_string(v) + " (this build reads " +
                          std::to_string(supported) + ")",
                      at);
  return v;
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  raw(&v, 4);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  raw(&v, 8);
  return v;
}

double BinaryReader::f64() {
  double v;
  raw(&v, 8);
  return v;
}

std::vector<double> BinaryReader::f64s(std::size_t n) {
  std::vector<double> v(n);
  if (n > 0)
    raw(v.data(), n * sizeof(double));
  return v;
}

std::string BinaryReader::str(std::size_t max_length) {
  const std::uint32_t n = u32();
  if (n > max_length)
    fail("implausible string length");
  std::string s(n, '\0');
  if (n > 0)
    raw(s.data(), n);
  return s;
}

void atomic_write(const std::string &path, const std::function<void(std::ostream &)> &body,
                  bool binary) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".partial";
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out)
      throw RuntimeError("cannot open for writing: " + tmp.string());
    try {
      body(out);
    } catch (...) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw;
    }
    out.flush();
    if (!out)
      throw RuntimeError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec)
    throw RuntimeError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

} // namespace polmc::io

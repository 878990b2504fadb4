#include "fcnseg/zipfile.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fcnseg::zipfile {

namespace {

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

uint16_t get_u16(const std::string& s, size_t off) {
  return static_cast<uint16_t>(static_cast<unsigned char>(s[off]) |
                               (static_cast<unsigned char>(s[off + 1]) << 8));
}

uint32_t get_u32(const std::string& s, size_t off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  return v;
}

uint32_t crc_of(const std::string& data) {
  return static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

}  // namespace

void write_zip(const std::string& path, const std::vector<Entry>& entries) {
  std::string out;
  struct Central {
    std::string name;
    uint32_t crc, size, offset;
  };
  std::vector<Central> central;

  for (const auto& e : entries) {
    const uint32_t crc = crc_of(e.data);
    const uint32_t offset = static_cast<uint32_t>(out.size());
    put_u32(out, 0x04034b50);                 // local file header
    put_u16(out, 20);                         // version needed
    put_u16(out, 0);                          // flags
    put_u16(out, 0);                          // method: stored
    put_u16(out, 0);                          // mod time
    put_u16(out, 0);                          // mod date
    put_u32(out, crc);
    put_u32(out, static_cast<uint32_t>(e.data.size()));  // compressed
    put_u32(out, static_cast<uint32_t>(e.data.size()));  // uncompressed
    put_u16(out, static_cast<uint16_t>(e.name.size()));
    put_u16(out, 0);                          // extra length
    out += e.name;
    out += e.data;
    central.push_back({e.name, crc, static_cast<uint32_t>(e.data.size()), offset});
  }

  const uint32_t cd_offset = static_cast<uint32_t>(out.size());
  for (const auto& c : central) {
    put_u32(out, 0x02014b50);
    put_u16(out, 20);  // version made by
    put_u16(out, 20);  // version needed
    put_u16(out, 0);
    put_u16(out, 0);
    put_u16(out, 0);
    put_u16(out, 0);
    put_u32(out, c.crc);
    put_u32(out, c.size);
    put_u32(out, c.size);
    put_u16(out, static_cast<uint16_t>(c.name.size()));
    put_u16(out, 0);
    put_u16(out, 0);
    put_u16(out, 0);
    put_u16(out, 0);
    put_u32(out, 0);
    put_u32(out, c.offset);
    out += c.name;
  }
  const uint32_t cd_size = static_cast<uint32_t>(out.size()) - cd_offset;

  put_u32(out, 0x06054b50);  // end of central directory
  put_u16(out, 0);
  put_u16(out, 0);
  put_u16(out, static_cast<uint16_t>(central.size()));
  put_u16(out, static_cast<uint16_t>(central.size()));
  put_u32(out, cd_size);
  put_u32(out, cd_offset);
  put_u16(out, 0);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open archive for write: " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::vector<Entry> read_zip(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open archive: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  const std::string s = buf.str();

  // locate the end-of-central-directory record from the back
  size_t eocd = std::string::npos;
  if (s.size() >= 22)
    for (size_t i = s.size() - 22; ; --i) {
      if (get_u32(s, i) == 0x06054b50) {
        eocd = i;
        break;
      }
      if (i == 0 || s.size() - i > 22 + 65535) break;
    }
  if (eocd == std::string::npos) throw std::runtime_error("archive has no central directory: " + path);

  const uint16_t count = get_u16(s, eocd + 10);
  size_t off = get_u32(s, eocd + 16);
  std::vector<Entry> entries;
  for (uint16_t i = 0; i < count; ++i) {
    if (get_u32(s, off) != 0x02014b50) throw std::runtime_error("bad central directory entry");
    const uint16_t method = get_u16(s, off + 10);
    const uint32_t crc = get_u32(s, off + 16);
    const uint32_t size = get_u32(s, off + 20);
    const uint16_t name_len = get_u16(s, off + 28);
    const uint16_t extra_len = get_u16(s, off + 30);
    const uint16_t comment_len = get_u16(s, off + 32);
    const uint32_t local_off = get_u32(s, off + 42);
    const std::string name = s.substr(off + 46, name_len);
    if (method != 0) throw std::runtime_error("archive entry " + name + " is not stored");

    const uint16_t lname = get_u16(s, local_off + 26);
    const uint16_t lextra = get_u16(s, local_off + 28);
    const size_t data_off = local_off + 30 + lname + lextra;
    Entry e{name, s.substr(data_off, size)};
    if (crc_of(e.data) != crc) throw std::runtime_error("archive entry " + name + " is corrupt");
    entries.push_back(std::move(e));
    off += 46u + name_len + extra_len + comment_len;
  }
  return entries;
}

}  // namespace fcnseg::zipfile

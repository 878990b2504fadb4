#pragma once

#include <string>
#include <vector>

namespace fcnseg::zipfile {

struct Entry {
  std::string name;
  std::string data;
};

/// Writes a zip archive with stored (uncompressed) entries.
void write_zip(const std::string& path, const std::vector<Entry>& entries);

/// Reads a zip archive written by write_zip (stored entries only).
std::vector<Entry> read_zip(const std::string& path);

}  // namespace fcnseg::zipfile

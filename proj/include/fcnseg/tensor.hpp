#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fcnseg {

/// Dense row-major tensor of 64-bit floats. Image tensors are [N,C,H,W].
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> extents);

  static Tensor zeros(std::vector<int64_t> extents);
  static Tensor full(std::vector<int64_t> extents, double value);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  size_t rank() const { return shape.size(); }
  int64_t dim(size_t i) const { return shape[i]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool same_shape(const std::vector<int64_t>& s) const { return shape == s; }

  double& at4(int64_t n, int64_t c, int64_t h, int64_t w) {
    return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  double at4(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  double& at2(int64_t r, int64_t c) { return data[r * shape[1] + c]; }
  double at2(int64_t r, int64_t c) const { return data[r * shape[1] + c]; }

  bool all_finite() const;
};

int64_t numel_of(const std::vector<int64_t>& shape);
std::string shape_str(const std::vector<int64_t>& shape);

void add_inplace(Tensor& dst, const Tensor& src);

/// Flat binary tensor blob: magic "FCNT", version u16, rank u8,
/// extents u64 little-endian, payload f64 little-endian.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

/// Stable sub-seed derivation (FNV-1a over seed bytes and a purpose label).
/// All randomness in the project flows from one run seed through this.
uint64_t derive_seed(uint64_t seed, std::string_view purpose);

Tensor random_normal(std::vector<int64_t> extents, double stddev, uint64_t seed);
Tensor random_uniform(std::vector<int64_t> extents, double lo, double hi, uint64_t seed);

}  // namespace fcnseg

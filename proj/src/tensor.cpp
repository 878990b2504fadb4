#include "fcnseg/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fcnseg {

int64_t numel_of(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e < 0) throw std::invalid_argument("tensor extent must be non-negative");
    n *= e;
  }
  return n;
}

std::string shape_str(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int64_t> extents)
    : shape(std::move(extents)), data(static_cast<size_t>(numel_of(shape)), 0.0) {}

Tensor Tensor::zeros(std::vector<int64_t> extents) { return Tensor(std::move(extents)); }

Tensor Tensor::full(std::vector<int64_t> extents, double value) {
  Tensor t(std::move(extents));
  std::fill(t.data.begin(), t.data.end(), value);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void add_inplace(Tensor& dst, const Tensor& src) {
  if (!dst.same_shape(src))
    throw std::invalid_argument("add_inplace: shape mismatch " + shape_str(dst.shape) + " vs " +
                                shape_str(src.shape));
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

namespace {

constexpr char kMagic[4] = {'F', 'C', 'N', 'T'};
constexpr uint16_t kVersion = 1;

void put_u16(std::ostream& os, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic, 4);
  put_u16(os, kVersion);
  os.put(static_cast<char>(t.rank()));
  for (int64_t e : t.shape) put_u64(os, static_cast<uint64_t>(e));
  for (double v : t.data) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
  }
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("tensor blob: bad magic");
  uint16_t ver = get_u16(is);
  if (ver != kVersion) throw std::runtime_error("tensor blob: unsupported version");
  int rank = is.get();
  if (rank < 0) throw std::runtime_error("tensor blob: truncated header");
  std::vector<int64_t> shape(static_cast<size_t>(rank));
  for (auto& e : shape) e = static_cast<int64_t>(get_u64(is));
  Tensor t(shape);
  for (auto& v : t.data) {
    uint64_t bits = get_u64(is);
    std::memcpy(&v, &bits, 8);
  }
  if (!is) throw std::runtime_error("tensor blob: truncated payload");
  return t;
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  write_tensor(os, t);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  return read_tensor(is);
}

uint64_t derive_seed(uint64_t seed, std::string_view purpose) {
  uint64_t h = 1469598103934665603ull;  // FNV offset basis
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 1099511628211ull;  // FNV prime
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  for (char c : purpose) mix(static_cast<unsigned char>(c));
  return h;
}

Tensor random_normal(std::vector<int64_t> extents, double stddev, uint64_t seed) {
  Tensor t(std::move(extents));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

Tensor random_uniform(std::vector<int64_t> extents, double lo, double hi, uint64_t seed) {
  Tensor t(std::move(extents));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

}  // namespace fcnseg

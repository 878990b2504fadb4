#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "fcnseg/tensor.hpp"

using namespace fcnseg;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("shape and data stay consistent") {
  Tensor t({2, 3, 4, 5});
  CHECK(t.numel() == 120);
  CHECK(numel_of(t.shape) == 120);
  t.at4(1, 2, 3, 4) = 7.5;
  CHECK(t.data.back() == 7.5);
  CHECK(Tensor::full({3}, 2.0).data == std::vector<double>{2.0, 2.0, 2.0});
}

TEST_CASE("blob round-trip is bit exact") {
  Tensor t = random_normal({3, 1, 4, 2}, 1.7, 99);
  t.data[0] = -0.0;
  t.data[1] = 1e-308;
  std::ostringstream os(std::ios::binary);
  write_tensor(os, t);
  std::istringstream is(os.str(), std::ios::binary);
  Tensor back = read_tensor(is);
  CHECK(back.shape == t.shape);
  for (size_t i = 0; i < t.data.size(); ++i) CHECK(back.data[i] == t.data[i]);
}

TEST_CASE("blob header starts with the magic bytes") {
  std::ostringstream os(std::ios::binary);
  write_tensor(os, Tensor({2}));
  const std::string s = os.str();
  CHECK(s.substr(0, 4) == "FCNT");
  // version u16 LE, rank u8, extent u64 LE
  CHECK(s[4] == 1);
  CHECK(s[5] == 0);
  CHECK(s[6] == 1);
  CHECK(static_cast<unsigned char>(s[7]) == 2);
}

TEST_CASE("truncated or corrupt blobs are rejected") {
  std::istringstream bad("nope", std::ios::binary);
  CHECK_THROWS(read_tensor(bad));
  std::ostringstream os(std::ios::binary);
  write_tensor(os, Tensor({4}));
  std::istringstream cut(os.str().substr(0, 12), std::ios::binary);
  CHECK_THROWS(read_tensor(cut));
}

TEST_CASE("file save/load round-trip") {
  const std::string path = (std::filesystem::temp_directory_path() / "fcnseg_t.fcnt").string();
  Tensor t = random_uniform({7}, -2, 2, 5);
  save_tensor(path, t);
  Tensor back = load_tensor(path);
  CHECK(back.data == t.data);
  std::remove(path.c_str());
}

TEST_CASE("derived seeds are stable and label-sensitive") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  // frozen value so the stream can never drift silently
  CHECK(derive_seed(0, "") == 5187598658539770339ull);
}

TEST_CASE("add_inplace rejects shape mismatch") {
  Tensor a({2, 2}), b({4});
  CHECK_THROWS(add_inplace(a, b));
}

TEST_SUITE_END();

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nse {

// Error taxonomy mirrored by the CLI exit codes: usage(2), data(3), numeric(4).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
class ParseError : public Error {
public:
  using Error::Error;
};
class ValidationError : public Error {
public:
  using Error::Error;
};
class NumericError : public Error {
public:
  using Error::Error;
};
class UsageError : public Error {
public:
  using Error::Error;
};

// Dense row-major matrix of doubles. Everything in the toolkit is rank <= 2;
// scalars are 1x1 and vectors are n x 1.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  size_t size() const { return data.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// Compressed sparse row matrix (symmetric use only needs one storage).
struct Csr {
  int rows = 0;
  int cols = 0;
  std::vector<int> ptr;  // size rows+1
  std::vector<int> idx;
  std::vector<double> val;
};

// Seeded RNG. std::mt19937_64 is fully specified by the standard; the value
// mappings below avoid the implementation-defined std distributions so that
// streams are reproducible across compilers.
class Rng {
public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  // uniform in [0,1) with 53 bits of resolution
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // uniform integer in [0,n), n > 0
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next()) *
                             static_cast<unsigned __int128>(n)) >> 64);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[uniform_int(i + 1)]);
    }
  }

  // k distinct values from {0,...,n-1}, order randomized
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < k; ++i) {
      int j = i + uniform_int(n - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

private:
  std::mt19937_64 eng_;
};

// FNV-1a, used for artifact checksums and seed derivation.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

// Deterministic seed derivation for sub-streams (masks, per-layer init, ...).
inline uint64_t mix_seed(uint64_t base, std::string_view tag) {
  uint64_t h = fnv1a64(tag);
  h = fnv1a64(&base, sizeof(base), h);
  // splitmix64 finalizer so nearby bases decorrelate
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

inline uint64_t mix_seed(uint64_t base, std::string_view tag, std::initializer_list<int64_t> parts) {
  uint64_t h = mix_seed(base, tag);
  for (int64_t v : parts) h = fnv1a64(&v, sizeof(v), h);
  return h;
}

}  // namespace nse

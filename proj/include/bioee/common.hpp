#pragma once

// Shared plumbing: error type with a stable code string, deterministic
// hashing/RNG (no libstdc++ distributions, so streams are identical across
// platforms), and small file helpers.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bioee {

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

// ---------------------------------------------------------------------------
// Hashing

inline constexpr uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

// splitmix64 finalizer; also used to derive independent seeds.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Top 53 bits -> [0, 1).
inline double unit_double(uint64_t u) { return double(u >> 11) * 0x1.0p-53; }

// ---------------------------------------------------------------------------
// Deterministic RNG (splitmix64 stream)

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double uniform() { return unit_double(next()); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n); n = 0 returns 0.
  uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  Rng fork(uint64_t tag) const { return Rng(mix64(state_ ^ mix64(tag))); }

 private:
  uint64_t state_;
};

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("MissingFile", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("MissingFile", "cannot write " + path.string());
  out.write(content.data(), std::streamsize(content.size()));
}

inline std::string hash_file_hex(const std::filesystem::path& path) {
  uint64_t h = fnv1a64(read_file(path));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Strings

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
  return out;
}

// Orders ids like T2 < T10 (prefix, then numeric suffix, then raw bytes).
inline bool natural_id_less(std::string_view a, std::string_view b) {
  auto head = [](std::string_view s) {
    size_t i = 0;
    while (i < s.size() && !(s[i] >= '0' && s[i] <= '9')) ++i;
    return i;
  };
  size_t ha = head(a), hb = head(b);
  if (a.substr(0, ha) != b.substr(0, hb)) return a.substr(0, ha) < b.substr(0, hb);
  unsigned long long na = 0, nb = 0;
  bool da = false, db = false;
  for (size_t i = ha; i < a.size() && a[i] >= '0' && a[i] <= '9'; ++i) na = na * 10 + uint64_t(a[i] - '0'), da = true;
  for (size_t i = hb; i < b.size() && b[i] >= '0' && b[i] <= '9'; ++i) nb = nb * 10 + uint64_t(b[i] - '0'), db = true;
  if (da && db && na != nb) return na < nb;
  return a < b;
}

}  // namespace bioee

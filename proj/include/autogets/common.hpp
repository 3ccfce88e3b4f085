#pragma once
// Shared basics: error types, stable hashing, a deterministic RNG whose
// sampling primitives are hand-rolled (std distributions vary across
// standard libraries), and a small thread pool helper.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace autogets {

// Bad user-supplied configuration or arguments; the CLI maps this to exit 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file contents; messages carry the offending line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
inline constexpr uint64_t kFnvPrime = 1099511628211ULL;

inline uint64_t fnv1a(std::string_view s, uint64_t h = kFnvOffset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a_u64(uint64_t v, uint64_t h = kFnvOffset) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= kFnvPrime;
  }
  return h;
}

// splitmix64 finalizer; bijective on 64-bit values.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Every randomized component derives its own stream from one master seed
// plus a role tag, so components can be reordered or parallelized without
// perturbing each other.
inline uint64_t derive_seed(uint64_t base, std::string_view role) {
  return mix64(base ^ fnv1a(role));
}

inline uint64_t derive_seed(uint64_t base, uint64_t salt) {
  return mix64(base ^ mix64(salt ^ 0x5851f42d4c957f2dULL));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(mix64(seed ^ 0x2545f4914f6cdd1dULL)) {}

  uint64_t next() { return eng_(); }

  // Unbiased integer in [0, n) via rejection sampling.
  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    uint64_t rem = std::numeric_limits<uint64_t>::max() % n;
    uint64_t limit = std::numeric_limits<uint64_t>::max() - rem;
    for (;;) {
      uint64_t x = next();
      if (x <= limit || rem + 1 == n) return x % n;
    }
  }

  size_t index(size_t n) { return static_cast<size_t>(below(n)); }

  // Inclusive range.
  int64_t range(int64_t lo, int64_t hi) {
    if (lo > hi) throw std::invalid_argument("Rng::range: lo > hi");
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo) + 1));
  }

  double real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return real() < p;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<size_t> sample_indices(size_t n, size_t k) {
    if (k > n) throw std::invalid_argument("Rng::sample_indices: k > n");
    std::vector<size_t> pool(n);
    for (size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<size_t> out;
    out.reserve(k);
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + index(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  std::mt19937_64 eng_;
};

// Runs fn(0..n-1) on up to `jobs` threads. Callers must make fn(i) write
// only to index-addressed slots so results do not depend on scheduling.
template <class Fn>
void parallel_for(int jobs, size_t n, Fn&& fn) {
  if (n == 0) return;
  size_t workers = jobs < 1 ? 1 : static_cast<size_t>(jobs);
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&]() {
      for (;;) {
        size_t i = cursor.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t b = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > b) out.emplace_back(s.substr(b, i - b));
  }
  return out;
}

inline std::vector<std::string> split_char(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t b = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(b, i - b));
      b = i + 1;
    }
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Shortest-round-trip formatting so serialized doubles reload bit-exact
// and reruns stay byte-identical.
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = std::strtod(buf, nullptr);
    if (back == v) return buf;
  }
  return buf;
}

inline double parse_double(const std::string& s, const std::string& what) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ParseError(what + ": not a number: '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s, const std::string& what) {
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw ParseError(what + ": not an integer: '" + s + "'");
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace autogets

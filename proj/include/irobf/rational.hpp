// Exact nonnegative rationals for block frequencies and region values.
// Keeping these exact (rather than double) makes every frequency-driven
// comparison independent of summation order.
#pragma once

#include <cstdint>
#include <numeric>
#include <string>

namespace irobf {

struct Rat {
  int64_t num = 0;
  int64_t den = 1;

  Rat() = default;
  Rat(int64_t n) : num(n), den(1) {}
  Rat(int64_t n, int64_t d) : num(n), den(d) { normalize(); }

  void normalize() {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
    if (num == 0) den = 1;
  }

  Rat operator+(const Rat& o) const {
    __int128 n = static_cast<__int128>(num) * o.den +
                 static_cast<__int128>(o.num) * den;
    __int128 d = static_cast<__int128>(den) * o.den;
    return reduce(n, d);
  }

  Rat operator*(const Rat& o) const {
    __int128 n = static_cast<__int128>(num) * o.num;
    __int128 d = static_cast<__int128>(den) * o.den;
    return reduce(n, d);
  }

  Rat operator/(const Rat& o) const {
    __int128 n = static_cast<__int128>(num) * o.den;
    __int128 d = static_cast<__int128>(den) * o.num;
    return reduce(n, d);
  }

  bool operator==(const Rat& o) const {
    return static_cast<__int128>(num) * o.den ==
           static_cast<__int128>(o.num) * den;
  }
  bool operator!=(const Rat& o) const { return !(*this == o); }
  bool operator<(const Rat& o) const {
    return static_cast<__int128>(num) * o.den <
           static_cast<__int128>(o.num) * den;
  }
  bool operator>(const Rat& o) const { return o < *this; }
  bool operator<=(const Rat& o) const { return !(o < *this); }
  bool operator>=(const Rat& o) const { return !(*this < o); }

  double to_double() const {
    return static_cast<double>(num) / static_cast<double>(den);
  }

  std::string to_string() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
  }

 private:
  static Rat reduce(__int128 n, __int128 d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 a = n < 0 ? -n : n, b = d;
    while (b) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
    Rat r;
    r.num = static_cast<int64_t>(n);
    r.den = static_cast<int64_t>(d);
    if (r.num == 0) r.den = 1;
    return r;
  }
};

}  // namespace irobf

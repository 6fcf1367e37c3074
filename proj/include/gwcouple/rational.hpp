#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gwcouple {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

// Accepts "3/4", "0.75", "1", "-2". Decimals are read exactly, so "0.1" is 1/10.
inline Rational parse_rational(std::string_view text) {
  auto fail = [&] { throw std::invalid_argument("not a rational number: '" + std::string(text) + "'"); };
  if (text.empty()) fail();
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    Rational num = parse_rational(text.substr(0, slash));
    Rational den = parse_rational(text.substr(slash + 1));
    if (den == 0) fail();
    return num / den;
  }
  bool negative = false;
  std::size_t i = 0;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    ++i;
  }
  BigInt digits = 0;
  BigInt scale = 1;
  bool seen_point = false;
  bool seen_digit = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c == '.' && !seen_point) {
      seen_point = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      digits = digits * 10 + (c - '0');
      if (seen_point) scale *= 10;
      seen_digit = true;
    } else {
      fail();
    }
  }
  if (!seen_digit) fail();
  Rational r(digits, scale);
  return negative ? Rational(-r) : r;
}

inline std::string to_string(const Rational& r) {
  if (denominator(r) == 1) return numerator(r).str();
  return numerator(r).str() + "/" + denominator(r).str();
}

/// Exact decimal text when the denominator has no prime factors besides 2 and
/// 5 (so 2/5 prints as "0.4"), otherwise "a/b".
inline std::string to_decimal(const Rational& r) {
  BigInt den = denominator(r);
  unsigned twos = 0, fives = 0;
  while (den % 2 == 0) den /= 2, ++twos;
  while (den % 5 == 0) den /= 5, ++fives;
  if (den != 1) return to_string(r);
  const unsigned places = std::max(twos, fives);
  BigInt scale = 1;
  for (unsigned i = 0; i < places; ++i) scale *= 10;
  const BigInt scaled = numerator(r) * scale / denominator(r);
  std::string sign = scaled < 0 ? "-" : "";
  std::string digits = (scaled < 0 ? BigInt(-scaled) : scaled).str();
  if (places == 0) return sign + digits;
  if (digits.size() <= places) digits.insert(0, places + 1 - digits.size(), '0');
  return sign + digits.substr(0, digits.size() - places) + "." + digits.substr(digits.size() - places);
}

}  // namespace gwcouple

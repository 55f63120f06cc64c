#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <boost/multiprecision/gmp.hpp>

namespace stackel {

/// Exact rational used for every probability and payoff value in the solver.
using Rational =
    boost::multiprecision::number<boost::multiprecision::gmp_rational,
                                  boost::multiprecision::et_off>;

/// Money in integer cents.
using Cents = std::int64_t;

/// A follower-value bound that may be -inf (no constraint).
using LowerBound = std::optional<Rational>;

inline Rational make_rational(std::int64_t num, std::int64_t den = 1) {
  return Rational(num) / Rational(den);
}

/// "a/b" or "a" (canonical form).
std::string to_string(const Rational& r);

/// Parses "a", "-a", "a/b" or a finite decimal such as "0.25".
Rational parse_rational(const std::string& text);

/// Exact decimal rendering with `digits` fractional digits, rounded half away
/// from zero (e.g. cents/100 rendered as dollars).
std::string to_fixed(const Rational& r, int digits);

/// Cents rendered as dollars with six fractional digits ("0.666667").
inline std::string cents_to_dollars(const Rational& cents) {
  return to_fixed(cents / 100, 6);
}

double to_double(const Rational& r);

}  // namespace stackel

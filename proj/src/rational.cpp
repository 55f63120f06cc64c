#include "stackel/rational.hpp"

#include <stdexcept>

namespace stackel {

namespace bmp = boost::multiprecision;
using Integer = bmp::number<bmp::gmp_int, bmp::et_off>;

std::string to_string(const Rational& r) {
  Integer num = bmp::numerator(r);
  Integer den = bmp::denominator(r);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

Rational parse_rational(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty rational");
  auto slash = text.find('/');
  auto dot = text.find('.');
  auto parse_int = [&](const std::string& s) {
    if (s.empty() || s == "-" || s == "+")
      throw std::invalid_argument("bad rational '" + text + "'");
    std::size_t start = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    for (std::size_t i = start; i < s.size(); ++i)
      if (s[i] < '0' || s[i] > '9')
        throw std::invalid_argument("bad rational '" + text + "'");
    return Integer(s[0] == '+' ? s.substr(1) : s);
  };
  if (slash != std::string::npos) {
    Integer den = parse_int(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator in '" + text + "'");
    return Rational(parse_int(text.substr(0, slash))) / Rational(den);
  }
  if (dot != std::string::npos) {
    std::string whole = text.substr(0, dot);
    std::string frac = text.substr(dot + 1);
    bool neg = !whole.empty() && whole[0] == '-';
    if (whole.empty() || whole == "-" || whole == "+") whole += "0";
    Integer w = parse_int(whole);
    if (frac.empty()) return Rational(w);
    Integer f = parse_int(frac);
    Integer scale = bmp::pow(Integer(10), static_cast<unsigned>(frac.size()));
    Rational magnitude = Rational(bmp::abs(w)) + Rational(f) / Rational(scale);
    return neg ? -magnitude : magnitude;
  }
  return Rational(parse_int(text));
}

std::string to_fixed(const Rational& r, int digits) {
  Integer scale = bmp::pow(Integer(10), static_cast<unsigned>(digits));
  Rational scaled = bmp::abs(r) * Rational(scale);
  Integer num = bmp::numerator(scaled);
  Integer den = bmp::denominator(scaled);
  Integer q = num / den;
  Integer rem = num - q * den;
  if (rem * 2 >= den) q += 1;
  std::string s = q.str();
  if (static_cast<int>(s.size()) <= digits)
    s.insert(0, static_cast<std::size_t>(digits + 1) - s.size(), '0');
  if (digits > 0) s.insert(s.size() - static_cast<std::size_t>(digits), ".");
  if (r < 0 && q != 0) s.insert(0, "-");
  return s;
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace stackel

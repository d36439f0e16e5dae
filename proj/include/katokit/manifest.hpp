#pragma once

// Experiment manifests: a small key = value format (TOML subset).
//
//   # comment
//   manifold = "sphere2"
//   checks = ["kernel-check", "is-kato"]
//   q = [2, 5]
//   [kernel]
//   method = "series:400"
//
// Values are strings, numbers, booleans or flat arrays of those.  Table headers prefix the keys
// that follow them.  Unknown keys, duplicates and type errors raise ParseError with the line
// and column of the offending token.

#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "json.hpp"

namespace katokit {

struct ManifestValue {
  using Scalar = std::variant<std::string, double, bool>;
  std::vector<Scalar> items;
  bool is_array = false;
  int line = 0, column = 0;
};

enum class ValueType { String, Number, Integer, Bool, StringList, NumberList };

struct KeySpec {
  ValueType type;
  std::string help;
};

/// Every key a manifest may use.
inline const std::map<std::string, KeySpec>& manifest_keys() {
  static const std::map<std::string, KeySpec> keys{
      {"manifold", {ValueType::String, "model spec, e.g. euclidean:3, torus:2:6.2832, product(euclidean:3,euclidean:3)"}},
      {"kernel.method", {ValueType::String, "auto | closed | series[:lmax] | imagesum[:K]"}},
      {"potential", {ValueType::String, "potential w"}},
      {"w_minus", {ValueType::String, "nonnegative w_- for semigroup-bound and kato-exponential (default: potential)"}},
      {"checks", {ValueType::StringList, "checks to run in order"}},
      {"seed", {ValueType::Integer, "base seed"}},
      {"t_min", {ValueType::Number, "smallest time"}},
      {"t_max", {ValueType::Number, "largest time"}},
      {"t_points", {ValueType::Integer, "number of times"}},
      {"x_points", {ValueType::Integer, "number of sampled base points"}},
      {"q", {ValueType::NumberList, "exponents"}},
      {"deltas", {ValueType::NumberList, "delta values for exponential bounds"}},
      {"r_values", {ValueType::NumberList, "interpolation parameters in (0,1)"}},
      {"radii", {ValueType::NumberList, "distances for the coulomb check"}},
      {"paths", {ValueType::Integer, "Monte Carlo paths"}},
      {"step", {ValueType::Number, "random-walk step h"}},
      {"grid_h", {ValueType::Number, "quadrature / finite-difference resolution"}},
      {"n", {ValueType::Integer, "semigroup grid size"}},
      {"factor", {ValueType::Integer, "product factor (1-based) carrying the potential"}},
      {"fk.radius", {ValueType::Number, "Faber-Krahn radius R"}},
      {"fk.a", {ValueType::Number, "Faber-Krahn constant a (0: Euclidean value)"}},
      {"pair", {ValueType::String, "control pair: on-diagonal | li-yau"}},
      {"tolerance", {ValueType::Number, "override for the check tolerance"}},
      {"output", {ValueType::String, "report path"}},
      {"plot", {ValueType::String, "CSV path for plot series"}},
      {"threads", {ValueType::Integer, "Monte Carlo worker threads"}},
  };
  return keys;
}

class Manifest {
 public:
  static Manifest parse(const std::string& text) {
    Manifest m;
    std::istringstream in(text);
    std::string line, table;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      Cursor c{line, 0, lineno};
      c.skip_ws();
      if (c.done() || c.peek() == '#') continue;
      if (c.peek() == '[') {
        ++c.pos;
        c.skip_ws();
        table = c.bare_key();
        c.skip_ws();
        c.expect(']');
        c.skip_ws();
        c.end_of_line();
        continue;
      }
      const int key_col = c.col();
      std::string key = c.bare_key();
      if (!table.empty()) key = table + "." + key;
      c.skip_ws();
      c.expect('=');
      c.skip_ws();
      ManifestValue v = c.value();
      c.skip_ws();
      c.end_of_line();
      const auto spec = manifest_keys().find(key);
      if (spec == manifest_keys().end()) throw ParseError("unknown key '" + key + "'", lineno, key_col);
      if (m.values_.count(key)) throw ParseError("duplicate key '" + key + "'", lineno, key_col);
      check_type(key, spec->second.type, v);
      m.order_.push_back(key);
      m.values_[key] = std::move(v);
    }
    return m;
  }

  static Manifest load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot read manifest '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  /// Line and column of the value of key (0, 0 when absent or set programmatically).
  std::pair<int, int> location(const std::string& key) const {
    if (!has(key)) return {0, 0};
    return {values_.at(key).line, values_.at(key).column};
  }

  std::string str(const std::string& key, const std::string& fallback = "") const {
    return has(key) ? std::get<std::string>(values_.at(key).items.front()) : fallback;
  }
  double num(const std::string& key, double fallback) const {
    return has(key) ? std::get<double>(values_.at(key).items.front()) : fallback;
  }
  long integer(const std::string& key, long fallback) const { return has(key) ? static_cast<long>(num(key, 0)) : fallback; }
  std::vector<double> nums(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& s : values_.at(key).items) out.push_back(std::get<double>(s));
    return out;
  }
  std::vector<std::string> strs(const std::string& key) const {
    std::vector<std::string> out;
    if (has(key))
      for (const auto& s : values_.at(key).items) out.push_back(std::get<std::string>(s));
    return out;
  }

  void set_number(const std::string& key, double v) {
    ManifestValue mv;
    mv.items.push_back(v);
    if (!has(key)) order_.push_back(key);
    values_[key] = mv;
  }

  void set_strings(const std::string& key, const std::vector<std::string>& v) {
    ManifestValue mv;
    mv.is_array = true;
    for (const auto& x : v) mv.items.push_back(x);
    if (!has(key)) order_.push_back(key);
    values_[key] = mv;
  }

  /// Values from other replace ours; new keys go to the end.
  void merge(const Manifest& other) {
    for (const auto& k : other.order_) {
      if (!has(k)) order_.push_back(k);
      values_[k] = other.values_.at(k);
    }
  }

  /// Keys and values in declaration order.
  nlohmann::ordered_json echo() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& k : order_) {
      const auto& v = values_.at(k);
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const auto& s : v.items) std::visit([&](const auto& x) { arr.push_back(x); }, s);
      j[k] = v.is_array ? arr : arr.front();
    }
    return j;
  }

 private:
  struct Cursor {
    const std::string& s;
    std::size_t pos;
    int line;

    bool done() const { return pos >= s.size(); }
    char peek() const { return s[pos]; }
    int col() const { return static_cast<int>(pos) + 1; }
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line, col()); }
    void skip_ws() {
      while (!done() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\r')) ++pos;
    }
    void expect(char ch) {
      if (done() || s[pos] != ch) fail(std::string("expected '") + ch + "'");
      ++pos;
    }
    void end_of_line() {
      if (!done() && s[pos] != '#') fail("unexpected trailing characters");
    }
    std::string bare_key() {
      const std::size_t start = pos;
      while (!done() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_' || s[pos] == '-' || s[pos] == '.')) ++pos;
      if (pos == start) fail("expected a key");
      return s.substr(start, pos - start);
    }
    ManifestValue::Scalar scalar() {
      if (done()) fail("expected a value");
      if (s[pos] == '"') {
        ++pos;
        std::string out;
        while (!done() && s[pos] != '"') {
          if (s[pos] == '\\' && pos + 1 < s.size()) ++pos;
          out += s[pos++];
        }
        expect('"');
        return out;
      }
      const std::size_t start = pos;
      while (!done() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != ',' && s[pos] != ']' && s[pos] != '#') ++pos;
      const std::string tok = s.substr(start, pos - start);
      if (tok == "true") return true;
      if (tok == "false") return false;
      if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used == tok.size()) return v;
      } catch (const std::exception&) {
      }
      pos = start;
      fail("cannot parse value '" + tok + "'");
    }
    ManifestValue value() {
      ManifestValue v;
      v.line = line;
      v.column = col();
      if (!done() && s[pos] == '[') {
        v.is_array = true;
        ++pos;
        skip_ws();
        while (!done() && s[pos] != ']') {
          v.items.push_back(scalar());
          skip_ws();
          if (!done() && s[pos] == ',') {
            ++pos;
            skip_ws();
          } else {
            break;
          }
        }
        expect(']');
        return v;
      }
      v.items.push_back(scalar());
      return v;
    }
  };

  static void check_type(const std::string& key, ValueType t, const ManifestValue& v) {
    auto bad = [&](const std::string& want) { throw ParseError("key '" + key + "' expects " + want, v.line, v.column); };
    const bool list = t == ValueType::StringList || t == ValueType::NumberList;
    if (list != v.is_array) bad(list ? "an array" : "a single value");
    for (const auto& s : v.items) {
      switch (t) {
        case ValueType::String:
        case ValueType::StringList:
          if (!std::holds_alternative<std::string>(s)) bad("a string");
          break;
        case ValueType::Number:
        case ValueType::NumberList:
          if (!std::holds_alternative<double>(s)) bad("a number");
          break;
        case ValueType::Integer:
          if (!std::holds_alternative<double>(s) || std::get<double>(s) != std::floor(std::get<double>(s))) bad("an integer");
          break;
        case ValueType::Bool:
          if (!std::holds_alternative<bool>(s)) bad("a boolean");
          break;
      }
    }
  }

  std::vector<std::string> order_;
  std::map<std::string, ManifestValue> values_;
};

}  // namespace katokit

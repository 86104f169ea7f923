#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace cslt {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor extents disagree (matmul inner dims, broadcast widths, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad numeric state or argument: NaN/Inf, degenerate masks, empty reductions.
class ValueError : public Error {
 public:
  using Error::Error;
};

// Token id outside the vocabulary.
class VocabError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (odd d_model, empty stream set, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures: missing feature file, unwritable run dir.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; carries a line number when one is known.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line) : Error(format(msg, line)), line_(line) {}
  explicit ParseError(const std::string& msg) : Error(msg), line_(-1) {}
  int line() const { return line_; }

 private:
  static std::string format(const std::string& msg, int line) {
    std::ostringstream os;
    os << msg << " (line " << line << ")";
    return os.str();
  }
  int line_;
};

namespace detail {
inline void concat_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void concat_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  concat_into(os, rest...);
}
}  // namespace detail

// Small stand-in for std::format (unavailable on this toolchain).
template <typename... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  detail::concat_into(os, args...);
  return os.str();
}

}  // namespace cslt

#pragma once

#include <stdexcept>
#include <string>

namespace langdepth {

// Base for every error raised by the toolkit. Input, format and contract
// violations use this type directly or FormatError; NumericalError marks
// a computation that produced non-finite values.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace langdepth

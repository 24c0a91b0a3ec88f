#pragma once

#include <stdexcept>
#include <string>

namespace mmiq {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class SizeLimitError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class FileError : public Error {
 public:
  using Error::Error;
};

/// A first-row or first-column entry is too small to carry a phase.
class GaugeAnchorError : public Error {
 public:
  GaugeAnchorError(const std::string& what, int row, int col)
      : Error(what), row_(row), col_(col) {}
  int row() const { return row_; }
  int col() const { return col_; }

 private:
  int row_;
  int col_;
};

/// No data cell survives the thresholds; nothing to fit.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

class FitFailure : public Error {
 public:
  FitFailure(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace mmiq

#pragma once

#include <stdexcept>
#include <string>

namespace lpknn {

// Base of every error raised by the library. Subclasses identify the failure
// class so front ends (CLI exit codes, HTTP status) can map them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Undecodable or out-of-alphabet input (image bytes, trimap values, files).
class DecodeError : public Error {
 public:
  using Error::Error;
};

// Inputs whose shapes disagree (image vs trimap, graph vs domination matrix).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Parameter outside its admissible range (k, lambda, class ids, GA config).
class ParamError : public Error {
 public:
  using Error::Error;
};

}  // namespace lpknn

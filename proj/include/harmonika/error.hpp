#pragma once

#include <stdexcept>
#include <string>

namespace harmonika {

// Base for every error raised by the library. The CLI maps the concrete
// type onto its exit-code contract.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration values.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Array or buffer dimensions that do not fit the operation.
class SizeError : public Error {
public:
  using Error::Error;
};

// Malformed input file (bad RIFF header, truncated chunk, bad checkpoint).
class FormatError : public Error {
public:
  using Error::Error;
};

// Well-formed input that uses an encoding we do not read.
class UnsupportedError : public Error {
public:
  using Error::Error;
};

// A filter would extend past half the sampling rate.
class NyquistError : public Error {
public:
  using Error::Error;
};

// Degenerate data: no frames to compare (e.g. nothing co-voiced).
class DegenerateDataError : public Error {
public:
  using Error::Error;
};

} // namespace harmonika

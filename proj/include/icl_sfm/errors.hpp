#pragma once

#include <stdexcept>
#include <string>

namespace icl_sfm {

// Base for every error raised by the library. Callers that only care about
// "something went wrong in the estimator stack" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotSPD : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

// A feature left the field of view; the simulated run cannot continue.
class FeatureLost : public Error {
 public:
  using Error::Error;
};

// Camera, goal and feature are collinear so H = [u_s, -u_g] lost rank.
class DegenerateBearing : public Error {
 public:
  using Error::Error;
};

class InsufficientBuffer : public Error {
 public:
  using Error::Error;
};

class NotYetExcited : public Error {
 public:
  using Error::Error;
};

// Configuration errors carry the offending key so diagnostics can name it.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : "'" + key + "': " + what), key_(std::move(key)) {}

  [[nodiscard]] const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace icl_sfm

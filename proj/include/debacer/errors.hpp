#pragma once

#include <stdexcept>
#include <string>

namespace debacer {

// Broad class of a failure; the CLI maps each class to its own exit code.
enum class ErrorClass { Config, Data, Training };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), cls_(cls), code_(std::move(code)) {}

  ErrorClass error_class() const noexcept { return cls_; }
  // Short machine-readable name, e.g. "MissingField" or "RankTooLarge".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorClass cls_;
  std::string code_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string code, const std::string& message)
      : Error(ErrorClass::Config, std::move(code), message) {}
};

class DataError : public Error {
 public:
  DataError(std::string code, const std::string& message)
      : Error(ErrorClass::Data, std::move(code), message) {}
};

class TrainingError : public Error {
 public:
  TrainingError(std::string code, const std::string& message)
      : Error(ErrorClass::Training, std::move(code), message) {}
};

}  // namespace debacer

#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

namespace plshoot {

// exit codes of the command line tool double as error categories
enum class ErrorCode { domain = 1, usage = 2, verification = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json witness = nullptr)
      : std::runtime_error(message), code_(code), witness_(std::move(witness)) {}

  ErrorCode code() const { return code_; }
  const nlohmann::json& witness() const { return witness_; }

 private:
  ErrorCode code_;
  nlohmann::json witness_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message, nlohmann::json witness = nullptr)
      : Error(ErrorCode::domain, message, std::move(witness)) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message, nlohmann::json witness = nullptr)
      : Error(ErrorCode::usage, message, std::move(witness)) {}
};

}  // namespace plshoot

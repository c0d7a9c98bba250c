#pragma once

#include <stdexcept>
#include <string>

namespace uwq {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A value violated a documented precondition or type invariant.
class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& msg) : Error(msg) {}
};

/// Configuration parsing / validation failure. Carries the offending key
/// so the CLI can point at it.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& msg)
      : Error(key.empty() ? msg : "config key '" + key + "': " + msg),
        key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// File or stream I/O failure.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// A pipeline stage failed; names the stage and preserves the cause text.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& cause)
      : Error("stage '" + stage + "' failed: " + cause), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace uwq

#pragma once

#include <stdexcept>
#include <string>

namespace dfaforge {

// Base of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSymbol : public Error {
 public:
  using Error::Error;
};

class InvalidDfa : public Error {
 public:
  using Error::Error;
};

class EmptyLanguageSlice : public Error {
 public:
  using Error::Error;
};

class DivergedLoss : public Error {
 public:
  using Error::Error;
};

class KTooLarge : public Error {
 public:
  using Error::Error;
};

class NeedTwoClusters : public Error {
 public:
  using Error::Error;
};

class EmptyTraceSet : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Bad arguments or configuration (as opposed to a failure while running).
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace dfaforge

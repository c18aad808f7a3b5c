#pragma once

#include <stdexcept>
#include <string>

namespace certpose {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class DegenerateConfiguration : public Error {
 public:
  using Error::Error;
};

class GenerationTimeout : public Error {
 public:
  using Error::Error;
};

class NonFiniteCost : public Error {
 public:
  using Error::Error;
};

class RankDeficientJacobian : public Error {
 public:
  using Error::Error;
};

class InfeasiblePoint : public Error {
 public:
  using Error::Error;
};

class NoModelFound : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace certpose

#pragma once

#include <stdexcept>
#include <string>

namespace crowdnav {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (bad sizes, empty inputs, bad config).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NonPositiveDefinite : public Error {
 public:
  using Error::Error;
};

// Policy output that cannot be turned into an action (NaN components).
class InvalidAction : public Error {
 public:
  using Error::Error;
};

class PredictorError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace crowdnav

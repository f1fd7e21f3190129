#pragma once

#include <stdexcept>
#include <string>

namespace evsim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutOfBoundsError : Error {
  using Error::Error;
};

struct EmptyModelError : Error {
  using Error::Error;
};

struct InvalidParamsError : Error {
  using Error::Error;
};

struct InvalidConfigError : Error {
  using Error::Error;
};

struct EpisodeFinishedError : Error {
  using Error::Error;
};

struct NonFiniteError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct EmptyInputError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace evsim

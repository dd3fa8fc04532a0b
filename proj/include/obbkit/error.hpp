// Copyright 2026 The obbkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OBBKIT__ERROR_HPP_
#define OBBKIT__ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace obbkit
{

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain argument.
class InvalidInput : public Error
{
public:
  using Error::Error;
};

/// Configuration value outside its allowed range.
class InvalidConfig : public Error
{
public:
  using Error::Error;
};

/// Collinear or zero-area geometry where a proper polygon is required.
class DegenerateInput : public Error
{
public:
  using Error::Error;
};

/// Adaptive threshold requested for a ground truth without candidates.
class NoCandidates : public Error
{
public:
  using Error::Error;
};

/// Synthetic scene cannot be realized (object larger than the image).
class GenerationError : public Error
{
public:
  using Error::Error;
};

/// Malformed annotation text. Carries the 1-based line number.
class ParseError : public Error
{
public:
  ParseError(std::size_t line, const std::string & what)
  : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept {return line_;}

private:
  std::size_t line_;
};

}  // namespace obbkit

#endif  // OBBKIT__ERROR_HPP_

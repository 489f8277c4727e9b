// Copyright (c) 2026 The fitroom Authors. All rights reserved.
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

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace fitroom {

// Base of every error raised by the library. The CLI maps DomainError to
// exit code 1 and IoError to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input values or violated preconditions.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed annotation documents; carries the byte offset and line number.
class ParseError : public DomainError {
 public:
  ParseError(const std::string& what, std::size_t byte, std::size_t line)
      : DomainError(what), byte_(byte), line_(line) {}
  std::size_t byte() const { return byte_; }
  std::size_t line() const { return line_; }

 private:
  std::size_t byte_;
  std::size_t line_;
};

// A record that parsed but broke an invariant.
class ValidationError : public DomainError {
 public:
  ValidationError(const std::string& what, long long annotation_id)
      : DomainError(what), annotation_id_(annotation_id) {}
  long long annotation_id() const { return annotation_id_; }

 private:
  long long annotation_id_;
};

// Unreadable/unwritable files, truncated or corrupt binary payloads.
class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void append(std::ostringstream&) {}

template <typename T, typename... Rest>
void append(std::ostringstream& oss, T&& head, Rest&&... rest) {
  oss << std::forward<T>(head);
  append(oss, std::forward<Rest>(rest)...);
}

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  append(oss, std::forward<Args>(args)...);
  return oss.str();
}

}  // namespace detail

template <typename E = DomainError, typename... Args>
inline void enforce(bool cond, Args&&... msg) {
  if (!cond) throw E(detail::concat(std::forward<Args>(msg)...));
}

}  // namespace fitroom

/*
 * Copyright 2026 The omni-refine Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef OMNI_ERROR_HPP
#define OMNI_ERROR_HPP

#include <stdexcept>
#include <string>

namespace omni {

enum class ErrorKind {
  Validation,  // malformed input, inconsistent observations, bad parameters
  Solver       // numerical failure: truncation cap, non-convergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string &what) {
  throw Error(ErrorKind::Validation, what);
}

[[noreturn]] inline void fail_solver(const std::string &what) {
  throw Error(ErrorKind::Solver, what);
}

}  // namespace omni

#endif  // OMNI_ERROR_HPP

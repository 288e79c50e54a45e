// Copyright 2026 The Jadena Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef JADENA_ERROR_HPP_
#define JADENA_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace jadena {

enum class Errc {
  file_not_found,
  unsupported_format,
  zero_sized_image,
  io_error,
  shape_mismatch,
  divergent_field,
  image_too_small,
  bad_weight_file,
  bad_config,
  bad_argument,
  empty_input,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace jadena

#endif  // JADENA_ERROR_HPP_

// Copyright 2026 the vsm-alloc authors
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

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vsmalloc {

// Root of every error thrown by the library. Callers that only care about
// "something went wrong" catch this; the subclasses exist so the CLI can map
// failures onto distinct exit codes.
class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

// Malformed or semantically invalid input: bad case files, invalid gains,
// out-of-range indices. One exception may carry several violations.
class InputError : public Error {
 public:
    explicit InputError(const std::string& what) : Error(what), violations_{what} {}
    explicit InputError(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out;
        for (const auto& item : items) {
            if (!out.empty()) out += "; ";
            out += item;
        }
        return out;
    }

    std::vector<std::string> violations_;
};

// A numerical procedure could not produce a trustworthy answer
// (defective spectrum, solver non-convergence, divergent simulation).
class NumericalError : public Error {
 public:
    using Error::Error;
};

}  // namespace vsmalloc

/*
 * Copyright 2026 The coplank Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace coplank {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (dimension mismatch, bad bounds, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// The Gram matrix could not be factorized even at the largest jitter level.
class IllConditionedKernel : public Error {
public:
    using Error::Error;
};

class FittingFailed : public Error {
public:
    using Error::Error;
};

class OptimizationFailed : public Error {
public:
    using Error::Error;
};

class GradientEvaluationError : public Error {
public:
    using Error::Error;
};

/// Value outside the open interval accepted by an inverse transform.
class OutOfDomain : public Error {
public:
    using Error::Error;
};

/// Malformed or incompatible serialized data (checkpoint, scenario, log).
class LoadError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace coplank

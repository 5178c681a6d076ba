// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>

namespace a1o {

/// Operand extents do not fit an operation.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller violated a documented precondition.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Invalid model, training or pipeline configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file or manifest content.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Point configuration admits no unique similarity transform.
class SingularConfiguration : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace a1o

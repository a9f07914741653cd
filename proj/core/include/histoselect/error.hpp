// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace histoselect {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violated precondition or type invariant (bad dims, out-of-range label, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Structurally broken input file: wrong magic, version, or record kind.
class FormatError : public Error {
public:
    using Error::Error;
};

// Payload shorter or longer than the header declares.
class LengthError : public Error {
public:
    using Error::Error;
};

// Mathematically unusable input, e.g. a zero-norm vector fed to cosine.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Non-finite value produced where a finite one is required.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace histoselect

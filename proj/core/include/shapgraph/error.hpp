// Copyright 2026 The shapgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPGRAPH_ERROR_HPP_
#define SHAPGRAPH_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace shapgraph {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed exchange document (bad JSON, bad base64, wrong field types).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed document that violates a graph invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class CycleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOp : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// The explained output does not depend on the explained input.
class NoPathError : public Error {
 public:
  using Error::Error;
};

// Backward traversal finished with reachable vertices left unvisited.
class StuckError : public Error {
 public:
  using Error::Error;
};

class MissingCacheEntry : public Error {
 public:
  using Error::Error;
};

}  // namespace shapgraph

#endif  // SHAPGRAPH_ERROR_HPP_

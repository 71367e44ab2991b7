#pragma once

// Error taxonomy for the obknn library. Each failure class gets its own
// exception type so callers can tell an empty datastore apart from an
// empty neighbor list, a malformed file from a bad argument, and so on.

#include <stdexcept>
#include <string>

namespace obknn {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Vector/distribution length disagreement.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Input that is structurally valid but unusable (zero-norm vector under
// cosine, query with no in-vocabulary tokens).
class DegenerateInputError : public Error {
public:
    explicit DegenerateInputError(const std::string& msg) : Error(msg) {}
};

// Lookup of an entry id that does not exist.
class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& msg) : Error(msg) {}
};

// Malformed persisted data: bad magic, truncation, header mismatch,
// unparseable JSON lines.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

class EmptyDatastoreError : public Error {
public:
    explicit EmptyDatastoreError(const std::string& msg) : Error(msg) {}
};

// Distinct from EmptyDatastoreError: a NeighborSet with no members.
class EmptyNeighborsError : public Error {
public:
    explicit EmptyNeighborsError(const std::string& msg) : Error(msg) {}
};

class InvalidArgumentError : public Error {
public:
    explicit InvalidArgumentError(const std::string& msg) : Error(msg) {}
};

}  // namespace obknn

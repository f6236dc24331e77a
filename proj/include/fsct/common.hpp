#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace fsct {

inline constexpr const char* kArtifactVersion = "0.1.0";

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void cat_into(std::ostringstream&) {}

template <class A, class... Rest>
void cat_into(std::ostringstream& os, const A& a, const Rest&... rest) {
    os << a;
    cat_into(os, rest...);
}

template <class... Args>
std::string cat(const Args&... args) {
    std::ostringstream os;
    cat_into(os, args...);
    return os.str();
}

} // namespace detail

} // namespace fsct

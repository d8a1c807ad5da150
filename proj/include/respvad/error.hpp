#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace respvad {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised while loading a frame sequence; frame() is 1-based.
class FrameError : public Error {
public:
    FrameError(std::size_t frame, const std::string& what)
        : Error("frame " + std::to_string(frame) + ": " + what), frame_(frame) {}

    std::size_t frame() const { return frame_; }

private:
    std::size_t frame_;
};

class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}

    double residual() const { return residual_; }

private:
    double residual_;
};

class SingleClassError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace respvad

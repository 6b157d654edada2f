#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nfield {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidExtent : Error {
    using Error::Error;
};

struct TooFewNodes : Error {
    using Error::Error;
};

struct DomainMismatch : Error {
    using Error::Error;
};

struct NonFiniteKernel : Error {
    using Error::Error;
};

struct NonFiniteValue : Error {
    using Error::Error;
};

/// The scalar equation handed to the monotone root finder does not bracket a
/// root (only reachable when a non-monotone activation slips past validation).
struct BracketFailure : Error {
    using Error::Error;
};

/// Iteration cap hit before the residual tolerance was met.
struct ToleranceNotMet : Error {
    using Error::Error;
};

/// z_ref leaves the attainable range of S1 at the listed nodes.
struct ReferenceUnreachable : Error {
    ReferenceUnreachable(const std::string& msg, std::vector<std::size_t> nodes)
        : Error(msg), offending_nodes(std::move(nodes)) {}
    std::vector<std::size_t> offending_nodes;
};

/// k_I * alpha vanishes at a node where the stationarity equation still
/// demands a nonzero integral action.
struct DivisionDegenerate : Error {
    DivisionDegenerate(const std::string& msg, std::size_t node)
        : Error(msg), offending_node(node) {}
    std::size_t offending_node;
};

struct HistoryUnderflow : Error {
    using Error::Error;
};

/// Configuration file problem; line is 1-based, 0 when not tied to a line.
struct ConfigError : Error {
    ConfigError(const std::string& msg, std::size_t line_no = 0)
        : Error(line_no ? "line " + std::to_string(line_no) + ": " + msg : msg),
          line(line_no) {}
    std::size_t line;
};

}  // namespace nfield

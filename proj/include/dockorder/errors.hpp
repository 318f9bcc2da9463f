#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dockorder {

/// Coarse error classes; the CLI maps them onto process exit codes.
enum class ErrorClass {
    internal,      // exit 1
    user_input,    // exit 2
    external_tool  // exit 3
};

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
    ErrorClass error_class() const noexcept { return class_; }

private:
    ErrorClass class_;
};

// dockerfile parser ---------------------------------------------------------

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t line, std::string reason)
        : Error(ErrorClass::user_input,
                "line " + std::to_string(line) + ": " + reason),
          line_(line), reason_(std::move(reason)) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

class ShellParseError : public Error {
public:
    ShellParseError(std::size_t offset, const std::string& reason)
        : Error(ErrorClass::user_input,
                "shell parse error at offset " + std::to_string(offset) + ": " + reason),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class UnsupportedConstruct : public Error {
public:
    explicit UnsupportedConstruct(std::string name)
        : Error(ErrorClass::user_input, "unsupported shell construct: " + name),
          name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

// dependency graph / optimizer ---------------------------------------------

class CyclicDependency : public Error {
public:
    explicit CyclicDependency(const std::string& detail)
        : Error(ErrorClass::internal, "cyclic dependency: " + detail) {}
};

class MissingWeight : public Error {
public:
    explicit MissingWeight(std::size_t index)
        : Error(ErrorClass::user_input,
                "missing or invalid weight for instruction " + std::to_string(index)),
          index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class TooLarge : public Error {
public:
    TooLarge(std::size_t n, std::size_t max_n)
        : Error(ErrorClass::user_input,
                "instance has " + std::to_string(n) + " nodes, brute force limit is " +
                    std::to_string(max_n)),
          n_(n) {}
    std::size_t n() const noexcept { return n_; }

private:
    std::size_t n_;
};

class GroupCycle : public Error {
public:
    explicit GroupCycle(std::vector<std::size_t> groups);
    const std::vector<std::size_t>& groups() const noexcept { return groups_; }

private:
    std::vector<std::size_t> groups_;
};

class InvalidGroups : public Error {
public:
    explicit InvalidGroups(const std::string& detail)
        : Error(ErrorClass::user_input, "invalid group map: " + detail) {}
};

// history miner --------------------------------------------------------------

class NotARepository : public Error {
public:
    explicit NotARepository(const std::string& path)
        : Error(ErrorClass::user_input, "not a git work tree: " + path) {}
};

class DockerfileNotFound : public Error {
public:
    explicit DockerfileNotFound(const std::string& path)
        : Error(ErrorClass::user_input, "Dockerfile not found: " + path) {}
};

class GitUnavailable : public Error {
public:
    explicit GitUnavailable(const std::string& detail)
        : Error(ErrorClass::external_tool, "git unavailable: " + detail) {}
};

// build cost -----------------------------------------------------------------

class RuntimeUnavailable : public Error {
public:
    explicit RuntimeUnavailable(const std::string& detail)
        : Error(ErrorClass::external_tool, "container runtime unavailable: " + detail) {}
};

class CleanupIncomplete : public Error {
public:
    explicit CleanupIncomplete(std::uint64_t bytes_remaining)
        : Error(ErrorClass::external_tool,
                "build cache not empty after prune: " + std::to_string(bytes_remaining) +
                    " bytes remaining"),
          bytes_(bytes_remaining) {}
    std::uint64_t bytes_remaining() const noexcept { return bytes_; }

private:
    std::uint64_t bytes_;
};

class MalformedLog : public Error {
public:
    explicit MalformedLog(const std::string& detail)
        : Error(ErrorClass::user_input, "malformed build log: " + detail) {}
};

class BuildFailed : public Error {
public:
    explicit BuildFailed(std::string log_excerpt)
        : Error(ErrorClass::external_tool, "build failed:\n" + log_excerpt),
          excerpt_(std::move(log_excerpt)) {}
    const std::string& log_excerpt() const noexcept { return excerpt_; }

private:
    std::string excerpt_;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& detail)
        : Error(ErrorClass::user_input, "parse error: " + detail) {}
};

class NegativeCost : public Error {
public:
    explicit NegativeCost(std::size_t index)
        : Error(ErrorClass::user_input,
                "negative build cost for instruction " + std::to_string(index)),
          index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

// rebuild simulator ----------------------------------------------------------

class UnknownIndex : public Error {
public:
    explicit UnknownIndex(std::size_t index)
        : Error(ErrorClass::user_input,
                "instruction index " + std::to_string(index) + " is not part of the order"),
          index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class EmptyHistory : public Error {
public:
    EmptyHistory() : Error(ErrorClass::user_input, "modification history is empty") {}
};

// consistency checker --------------------------------------------------------

class InspectorFailure : public Error {
public:
    InspectorFailure(std::string which, const std::string& detail)
        : Error(ErrorClass::external_tool, "inspector " + which + " failed: " + detail),
          which_(std::move(which)) {}
    const std::string& which() const noexcept { return which_; }

private:
    std::string which_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& detail) : Error(ErrorClass::internal, "I/O error: " + detail) {}
};

}  // namespace dockorder

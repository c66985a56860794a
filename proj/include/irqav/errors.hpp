#pragma once

#include <stdexcept>
#include <string>

namespace irqav {

// Base for everything the frontend and analyses can throw. Carries the
// 1-based source line when one is known (0 otherwise).
class AnalysisError : public std::runtime_error {
public:
    AnalysisError(int line, const std::string& what)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

class SyntaxError : public AnalysisError {
public:
    SyntaxError(int line, const std::string& message)
        : AnalysisError(line, "syntax error: " + message) {}
};

// Raised loudly for any construct outside the supported C subset.
class UnsupportedConstruct : public AnalysisError {
public:
    UnsupportedConstruct(int line, const std::string& construct)
        : AnalysisError(line, "unsupported construct: " + construct) {}
};

class MissingMain : public AnalysisError {
public:
    MissingMain() : AnalysisError(0, "program has no main function") {}
};

class SimError : public AnalysisError {
public:
    SimError(int line, const std::string& message)
        : AnalysisError(line, "simulation error: " + message) {}
};

// Agent-layer failures.
class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

class BackendUnavailable : public BackendError {
public:
    explicit BackendUnavailable(const std::string& what)
        : BackendError("backend unavailable: " + what) {}
};

class MalformedReply : public BackendError {
public:
    explicit MalformedReply(const std::string& what)
        : BackendError("malformed reply: " + what) {}
};

class PromptOverBudget : public BackendError {
public:
    PromptOverBudget(std::size_t size, std::size_t budget)
        : BackendError("prompt of " + std::to_string(size) +
                       " chars exceeds context budget of " + std::to_string(budget)) {}
};

}  // namespace irqav

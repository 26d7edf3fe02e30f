#pragma once

#include <stdexcept>
#include <string>

namespace safeplan {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyPrompt : Error {
    EmptyPrompt() : Error("prompt is empty") {}
};

struct MalformedRecord : Error {
    int line_no;
    MalformedRecord(int line, const std::string& detail)
        : Error("line " + std::to_string(line) + ": " + detail), line_no(line) {}
};

struct UnknownEnumValue : Error {
    std::string field;
    std::string value;
    UnknownEnumValue(std::string f, std::string v)
        : Error("unknown value '" + v + "' for field '" + f + "'"),
          field(std::move(f)), value(std::move(v)) {}
};

struct InvalidPredicateForLayer : Error {
    std::string rule_id;
    InvalidPredicateForLayer(std::string id, const std::string& detail)
        : Error("rule '" + id + "': " + detail), rule_id(std::move(id)) {}
};

struct MalformedPattern : Error {
    std::string rule_id;
    MalformedPattern(std::string id, const std::string& detail)
        : Error("rule '" + id + "': " + detail), rule_id(std::move(id)) {}
};

struct RuleLayerMismatch : Error {
    using Error::Error;
};

struct UnboundSlot : Error {
    std::string slot;
    explicit UnboundSlot(std::string name)
        : Error("unbound parameter slot '" + name + "'"), slot(std::move(name)) {}
};

struct SpecParseError : Error {
    int line_no;
    SpecParseError(int line, const std::string& detail)
        : Error("structured spec line " + std::to_string(line) + ": " + detail),
          line_no(line) {}
};

struct ProviderTimeout : Error {
    using Error::Error;
};

struct ProviderMalformedOutput : Error {
    int attempt;
    ProviderMalformedOutput(int attempt_no, const std::string& detail)
        : Error("attempt " + std::to_string(attempt_no) + ": " + detail),
          attempt(attempt_no) {}
};

struct InconsistentFlags : Error {
    std::size_t index;
    InconsistentFlags(std::size_t i, const std::string& detail)
        : Error("result " + std::to_string(i) + ": " + detail), index(i) {}
};

} // namespace safeplan

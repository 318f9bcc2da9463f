// Dockerfile DSL layer: typed instruction list with lossless serialization.
//
// Each instruction keeps the exact source text it came from, including the
// comments and blank lines written above it, so that an unmodified document
// serializes byte-for-byte and a reordered one moves comments together with
// the instruction they describe.
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace dockorder {

enum class InstructionKind {
    From,
    Arg,
    Env,
    Label,
    Copy,
    Add,
    Workdir,
    User,
    Volume,
    Run,
    Shell,
    Cmd,
    Entrypoint,
    Expose,
    Onbuild,
    Healthcheck,
    Stopsignal,
    Maintainer,
};

inline constexpr std::size_t kInstructionKindCount = 18;

std::string_view to_string(InstructionKind kind);
std::optional<InstructionKind> kind_from_keyword(std::string_view keyword);  // case-insensitive
const std::vector<InstructionKind>& all_instruction_kinds();

struct SourceSpan {
    std::size_t start_line = 0;  // 1-based, first line of the instruction itself
    std::size_t end_line = 0;    // 1-based, last continuation line
    std::string raw_text;        // leading comments/blank lines + instruction text, verbatim
    std::size_t instruction_offset = 0;  // where the instruction starts inside raw_text

    std::string_view leading_text() const { return std::string_view(raw_text).substr(0, instruction_offset); }
    std::string_view instruction_text() const { return std::string_view(raw_text).substr(instruction_offset); }
};

struct Flag {
    std::string name;   // without the leading "--"
    std::optional<std::string> value;

    bool operator==(const Flag&) const = default;
};

struct KeyValue {
    std::string key;
    std::optional<std::string> value;  // ARG without a default has no value

    bool operator==(const KeyValue&) const = default;
};

struct KeyValueList {
    std::vector<KeyValue> pairs;
    bool legacy_form = false;  // "ENV key value" without '='
    bool operator==(const KeyValueList&) const = default;
};

struct ShellText {
    std::string text;
    bool heredoc = false;  // contains <<DELIM bodies; never split further
    bool operator==(const ShellText&) const = default;
};

struct ExecArray {
    std::vector<std::string> items;
    bool json = true;  // false for whitespace-separated lists (VOLUME a b, EXPOSE 80 443)
    bool operator==(const ExecArray&) const = default;
};

struct PathArgs {
    std::vector<std::string> sources;
    std::string destination;
    bool json = false;
    bool operator==(const PathArgs&) const = default;
};

struct SingleValue {
    std::string value;
    bool operator==(const SingleValue&) const = default;
};

using ArgumentPayload = std::variant<KeyValueList, ShellText, ExecArray, PathArgs, SingleValue>;

struct Instruction {
    InstructionKind kind = InstructionKind::Run;
    std::string keyword;  // as written (case preserved)
    std::vector<Flag> flags;
    ArgumentPayload arguments;
    SourceSpan span;
    std::size_t stage_index = 0;
    std::size_t index = 0;
    /// HEALTHCHECK only: the "CMD" form (false for HEALTHCHECK NONE).
    bool healthcheck_cmd = false;
    /// Logical text: keyword onwards, continuations folded, heredoc bodies appended.
    std::string text;

    bool deprecated() const { return kind == InstructionKind::Maintainer; }
    std::optional<std::string> flag(std::string_view name) const;
};

/// Structural equality: kind, flags, arguments, stage and position. Spans are ignored.
bool same_structure(const Instruction& a, const Instruction& b);

struct Directive {
    std::string name;
    std::string value;
    bool operator==(const Directive&) const = default;
};

struct ParsedDockerfile {
    std::vector<Directive> directives;
    std::string directive_text;  // verbatim directive lines
    std::vector<Instruction> instructions;
    std::string trailing_comments;
    char escape = '\\';

    /// Index of the first FROM, or instructions.size() if there is none.
    std::size_t first_from() const;
};

bool same_structure(const ParsedDockerfile& a, const ParsedDockerfile& b);

/// Throws SyntaxError naming the offending line.
ParsedDockerfile parse_dockerfile(std::string_view text);

std::string serialize(const ParsedDockerfile& doc);

/// Serialize with instructions emitted in `order` (a permutation of indices).
/// Directives stay first, trailing comments stay last; every other byte
/// travels with its instruction.
std::string serialize(const ParsedDockerfile& doc, const std::vector<std::size_t>& order);

/// Canonical single-line rendering used when no source text is available.
std::string format_instruction(const Instruction& instr);

// FROM helpers
std::string from_image(const Instruction& from);
std::optional<std::string> from_alias(const Instruction& from);

}  // namespace dockorder

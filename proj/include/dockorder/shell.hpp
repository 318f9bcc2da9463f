// Shell layer: a POSIX-subset parser that splits shell text on control
// operators into simple commands. Supported: pipelines, &&, ||, ;, single and
// double quotes, backslash escapes, $VAR / ${VAR} references, redirections and
// '#' comments. Anything else raises UnsupportedConstruct so callers can treat
// the body as opaque.
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dockorder {

enum class Connector { And, Or, Pipe, Sequence, None };

std::string_view to_string(Connector c);

struct Redirection {
    std::string op;      // ">", ">>", "<", "2>", "&>", "2>&1" style operators, verbatim
    std::string target;  // verbatim word; empty for fd duplications like 2>&1

    bool operator==(const Redirection&) const = default;
};

struct SimpleCommand {
    std::string program;                      // verbatim first word
    std::vector<std::string> words;           // every word after the program, verbatim, in order
    std::vector<std::string> flags;           // words starting with '-'
    std::vector<std::string> positional_args; // the remaining words
    std::vector<std::string> assignments;     // leading NAME=value words
    std::vector<Redirection> redirections;
    Connector connector_to_next = Connector::None;

    bool operator==(const SimpleCommand&) const = default;
};

std::vector<SimpleCommand> parse_shell(std::string_view text);

/// Render a command list back to shell text; parse_shell(join_commands(x)) == x.
std::string join_commands(const std::vector<SimpleCommand>& commands);

/// Remove one level of shell quoting and backslash escapes from a word.
std::string unquote(std::string_view word);

}  // namespace dockorder

// Command knowledge registry: what a shell program does to files, packages
// and the working directory, keyed by program and optional subcommand.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dockorder {

/// Selectors pick arguments out of a command line:
///   all | first | last | all_but_last | rest | arg:<n> | flag:<name> | path:<literal>
struct EffectTemplate {
    std::vector<std::string> reads;
    std::vector<std::string> writes;
    std::vector<std::string> installs;
    std::vector<std::string> removes;
    std::vector<std::string> uses;
    std::optional<std::string> changes_dir;
    std::set<std::string> value_flags;  // flags that consume the following word
    std::map<std::string, EffectTemplate> subcommands;
    bool known = true;
};

struct CommandEffects {
    std::set<std::string> reads;   // as written, relative paths not yet expanded
    std::set<std::string> writes;
    std::set<std::string> installs;  // normalized package names
    std::set<std::string> uses;
    std::optional<std::string> new_dir;
    bool known = true;
};

class CommandKnowledgeRegistry {
public:
    static CommandKnowledgeRegistry from_json(std::string_view json_text);
    static CommandKnowledgeRegistry from_file(const std::string& path);
    static const CommandKnowledgeRegistry& builtin();

    /// Template for a program (basename) and, when declared, its subcommand.
    /// Unknown programs yield an empty template with known=false.
    EffectTemplate lookup(std::string_view program, std::optional<std::string_view> subcommand = {}) const;

    /// Apply a template to an unquoted, variable-resolved argument vector
    /// (argv[0] is the program). Wrappers such as sudo are peeled first.
    CommandEffects apply(const std::vector<std::string>& argv) const;

    /// Tools made available by installing `package` (always includes the package itself).
    std::set<std::string> tools_for(std::string_view package) const;

    bool is_wrapper(std::string_view program) const { return wrappers_.count(std::string(program)) > 0; }

private:
    std::map<std::string, EffectTemplate> programs_;
    std::map<std::string, std::string> aliases_;
    std::set<std::string> wrappers_;
    std::vector<std::pair<std::string, std::vector<std::string>>> provides_;
};

/// Lowercase, strip versions ("==1.0", "=1.2", "@1"), extras ("[x]") and arch suffixes (":amd64").
std::string normalize_package(std::string_view name);

/// "/usr/bin/python3" -> "python3"
std::string program_basename(std::string_view program);

}  // namespace dockorder

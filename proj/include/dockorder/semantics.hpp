// Semantic element extraction: environment folding, variable resolution,
// path expansion and per-instruction element sets.
#pragma once

#include "dockorder/dockerfile.hpp"
#include "dockorder/registry.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dockorder {

struct EnvState {
    std::map<std::string, std::string> variables;    // ARG/ENV visible in the current stage
    std::map<std::string, std::string> global_args;  // ARGs declared before the first FROM
    std::string workdir = "/";
    std::string user = "root";
    std::vector<std::string> shell{"/bin/sh", "-c"};
    std::size_t stage_index = 0;
    bool in_stage = false;  // false until the first FROM

    bool operator==(const EnvState&) const = default;
};

EnvState fold_state(const EnvState& state, const Instruction& instr);

/// States before each instruction: result[i] is the state instr i sees.
std::vector<EnvState> fold_all(const ParsedDockerfile& doc);

struct Resolution {
    std::string text;
    std::set<std::string> used;        // referenced and defined
    std::set<std::string> unresolved;  // referenced but undefined
};

/// $NAME, ${NAME}, ${NAME:-word}, ${NAME:+word}; "\$" stays literal.
/// Substitution repeats until nothing changes, at most 8 passes.
Resolution resolve_variables(std::string_view text, const std::map<std::string, std::string>& vars);
Resolution resolve_variables(std::string_view text, const EnvState& state);

/// Join a relative pattern onto the working directory and normalize "." / "..".
std::string expand_path(std::string_view pattern, const EnvState& state);
std::string expand_path(std::string_view pattern, std::string_view workdir);

struct SemanticMisc {
    bool from = false;
    bool onbuild = false;
    bool healthcheck = false;
    bool stopsignal = false;
    bool global_arg = false;  // ARG before the first FROM
    bool opaque = false;      // shell body outside the supported subset
    bool deprecated = false;
    std::optional<std::string> copy_from;   // COPY --from=<stage>
    std::optional<std::string> from_image;  // FROM <image>, variables resolved

    bool operator==(const SemanticMisc&) const = default;
};

struct SemanticElements {
    std::set<std::string> vars_defined;
    std::set<std::string> vars_used;
    std::set<std::string> vars_unresolved;
    std::set<std::string> paths_in;
    std::set<std::string> paths_out;
    std::set<std::string> context_paths;  // build-context side of COPY/ADD; URLs prefixed "remote:"
    std::string user_read = "root";
    std::optional<std::string> user_written;
    std::set<std::string> pkgs_installed;
    std::set<std::string> pkgs_used;
    std::set<std::string> tools_provided;
    std::set<std::string> context_writes;  // workdir, shell, env, user
    std::set<std::string> context_reads;   // workdir, shell
    SemanticMisc misc;

    bool operator==(const SemanticElements&) const = default;
};

SemanticElements extract_elements(const Instruction& instr, const EnvState& state,
                                  const CommandKnowledgeRegistry& registry = CommandKnowledgeRegistry::builtin());

/// Elements for every instruction of a document, each under its folded state.
std::vector<SemanticElements> extract_all(const ParsedDockerfile& doc,
                                          const CommandKnowledgeRegistry& registry = CommandKnowledgeRegistry::builtin());

/// Strip "./" and leading "/" from a build-context pattern; "." stays ".".
std::string normalize_context_path(std::string_view pattern);

}  // namespace dockorder

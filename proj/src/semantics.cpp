#include "dockorder/semantics.hpp"

#include "dockorder/errors.hpp"
#include "dockorder/path_trie.hpp"
#include "dockorder/shell.hpp"
#include "text_util.hpp"

namespace dockorder {

using detail::is_name_char;
using detail::is_name_start;

namespace {

constexpr int kMaxResolvePasses = 8;
constexpr char kLiteralDollar = '\x01';

const std::set<std::string> kShells{"sh", "bash", "dash", "ash", "zsh"};

bool ignored_path(std::string_view p) {
    return p.empty() || p.rfind("/dev/", 0) == 0 || p == "/dev" || p.rfind("/proc/", 0) == 0;
}

std::string home_of(const std::string& user) {
    auto name = user.substr(0, user.find(':'));
    return name == "root" || name == "0" ? "/root" : "/home/" + name;
}

std::string strip_trailing_slash(std::string p) {
    while (p.size() > 1 && p.back() == '/') p.pop_back();
    return p;
}

std::string basename_of(std::string_view p) {
    while (p.size() > 1 && p.back() == '/') p.remove_suffix(1);
    auto slash = p.rfind('/');
    return std::string(slash == std::string_view::npos ? p : p.substr(slash + 1));
}

bool is_url(std::string_view s) {
    return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0 || s.rfind("git@", 0) == 0;
}

// One substitution pass over `s`. Returns the new text.
std::string substitute_once(const std::string& s, const std::map<std::string, std::string>& vars, Resolution& r) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        char c = s[i];
        if (c != '$' || i + 1 >= s.size()) {
            out += c;
            ++i;
            continue;
        }
        if (s[i + 1] == '{') {
            int depth = 0;
            std::size_t j = i + 1;
            for (; j < s.size(); ++j) {
                if (s[j] == '{') ++depth;
                if (s[j] == '}' && --depth == 0) break;
            }
            if (j >= s.size()) {
                out += s.substr(i);
                break;
            }
            std::string inner = s.substr(i + 2, j - i - 2);
            std::size_t k = 0;
            while (k < inner.size() && (k == 0 ? is_name_start(inner[k]) : is_name_char(inner[k]))) ++k;
            std::string name = inner.substr(0, k);
            std::string op, word;
            std::string rest = inner.substr(k);
            for (std::string_view candidate : {":-", ":+", "-", "+"}) {
                if (rest.rfind(candidate, 0) == 0) {
                    op = candidate;
                    word = rest.substr(candidate.size());
                    break;
                }
            }
            if (name.empty() || (op.empty() && !rest.empty())) {
                out += s.substr(i, j - i + 1);  // not a form we model
                i = j + 1;
                continue;
            }
            auto it = vars.find(name);
            if (it != vars.end()) {
                r.used.insert(name);
                const std::string& v = it->second;
                if (op.empty() || op == "-") out += v;
                else if (op == ":-") out += v.empty() ? word : v;
                else if (op == ":+") out += v.empty() ? std::string() : word;
                else out += word;  // "+"
            } else {
                r.unresolved.insert(name);
                if (op == ":-" || op == "-") out += word;
                else if (op.empty()) out += s.substr(i, j - i + 1);
                // ":+" / "+" on an unset name expand to nothing
            }
            i = j + 1;
            continue;
        }
        if (is_name_start(s[i + 1])) {
            std::size_t j = i + 1;
            while (j < s.size() && is_name_char(s[j])) ++j;
            std::string name = s.substr(i + 1, j - i - 1);
            auto it = vars.find(name);
            if (it != vars.end()) {
                r.used.insert(name);
                out += it->second;
            } else {
                r.unresolved.insert(name);
                out += s.substr(i, j - i);
            }
            i = j;
            continue;
        }
        out += c;
        ++i;
    }
    return out;
}

std::string protect_escapes(std::string_view text) {
    std::string s;
    s.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\\' && i + 1 < text.size() && text[i + 1] == '$') {
            s += kLiteralDollar;
            ++i;
        } else {
            s += text[i];
        }
    }
    return s;
}

std::string restore_escapes(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == kLiteralDollar) out += "\\$";
        else out += c;
    }
    return out;
}

void add_vars(SemanticElements& e, const Resolution& r) {
    e.vars_used.insert(r.used.begin(), r.used.end());
    e.vars_unresolved.insert(r.unresolved.begin(), r.unresolved.end());
}

class CommandInterpreter {
public:
    CommandInterpreter(const EnvState& state, const CommandKnowledgeRegistry& reg, SemanticElements& e, bool file_effects)
        : state_(state), reg_(reg), e_(e), file_effects_(file_effects), cwd_(state.workdir) {}

    void run_list(const std::vector<SimpleCommand>& cmds, int depth = 0) {
        for (const auto& cmd : cmds) run_command(cmd, depth);
    }

    void run_argv(const std::vector<std::string>& argv, const std::vector<Redirection>& redirs, int depth) {
        if (argv.empty()) return;
        std::string prog = program_basename(argv[0]);
        if (kShells.count(prog)) {
            for (std::size_t i = 1; i + 1 < argv.size(); ++i) {
                if (argv[i] == "-c") {
                    e_.pkgs_used.insert(detail::to_lower(prog));
                    if (depth >= 4) {
                        e_.misc.opaque = true;
                        return;
                    }
                    try {
                        run_list(parse_shell(argv[i + 1]), depth + 1);
                    } catch (const UnsupportedConstruct&) {
                        e_.misc.opaque = true;
                    } catch (const ShellParseError&) {
                        e_.misc.opaque = true;
                    }
                    return;
                }
            }
        }
        CommandEffects fx = reg_.apply(argv);
        for (const auto& u : fx.uses) e_.pkgs_used.insert(detail::to_lower(u));
        if (file_effects_) {
            for (const auto& p : fx.reads) add_path(e_.paths_in, p);
            for (const auto& p : fx.writes) add_path(e_.paths_out, p);
            e_.pkgs_installed.insert(fx.installs.begin(), fx.installs.end());
            for (const auto& r : redirs) {
                if (r.op.back() == '&') continue;  // fd duplication
                std::string target = unquote(resolve_variables(r.target, state_).text);
                if (r.op.find('<') != std::string::npos) add_path(e_.paths_in, target);
                else add_path(e_.paths_out, target);
            }
        }
        if (prog == "cd" && fx.new_dir == std::nullopt) {
            cwd_ = home_of(state_.user);
        } else if (fx.new_dir && *fx.new_dir != "-") {
            cwd_ = strip_trailing_slash(expand_path(*fx.new_dir, cwd_));
        }
    }

private:
    void run_command(const SimpleCommand& cmd, int depth) {
        std::vector<std::string> argv;
        argv.push_back(unquote(resolve_variables(cmd.program, state_).text));
        for (const auto& w : cmd.words) argv.push_back(unquote(resolve_variables(w, state_).text));
        run_argv(argv, cmd.redirections, depth);
    }

    void add_path(std::set<std::string>& into, const std::string& p) {
        if (p.empty()) return;
        std::string abs = p[0] == '~' ? home_of(state_.user) + p.substr(1) : p;
        abs = expand_path(abs, cwd_);
        if (!ignored_path(abs)) into.insert(abs);
    }

    const EnvState& state_;
    const CommandKnowledgeRegistry& reg_;
    SemanticElements& e_;
    bool file_effects_;
    std::string cwd_;
};

// RUN / CMD / ENTRYPOINT / HEALTHCHECK CMD
void extract_command(const ArgumentPayload& payload, const EnvState& state, const CommandKnowledgeRegistry& reg,
                     SemanticElements& e, bool file_effects) {
    e.context_reads.insert("workdir");
    CommandInterpreter interp(state, reg, e, file_effects);
    if (const auto* exec = std::get_if<ExecArray>(&payload)) {
        // exec form: no shell, no variable substitution
        interp.run_argv(exec->items, {}, 0);
        return;
    }
    const auto* sh = std::get_if<ShellText>(&payload);
    if (!sh) return;
    e.context_reads.insert("shell");
    add_vars(e, resolve_variables(sh->text, state));
    if (sh->heredoc) {
        e.misc.opaque = true;
        return;
    }
    try {
        interp.run_list(parse_shell(sh->text));
    } catch (const UnsupportedConstruct&) {
        e.misc.opaque = true;
    } catch (const ShellParseError&) {
        e.misc.opaque = true;
    }
}

bool dest_is_directory(std::string_view raw_dest, std::size_t source_count) {
    return raw_dest.empty() || raw_dest.back() == '/' || raw_dest == "." || raw_dest == ".." || source_count > 1;
}

bool source_is_directory(std::string_view src) {
    return src == "." || src == ".." || src.back() == '/' || src == "*";
}

void extract_copy(const Instruction& instr, const EnvState& state, SemanticElements& e) {
    const auto& args = std::get<PathArgs>(instr.arguments);
    if (auto from = instr.flag("from")) e.misc.copy_from = resolve_variables(*from, state).text;
    if (auto chown = instr.flag("chown")) {
        add_vars(e, resolve_variables(*chown, state));
        if (!chown->empty() && !std::isdigit(static_cast<unsigned char>((*chown)[0]))) e.paths_in.insert("/etc/passwd");
    }
    auto dest_r = resolve_variables(args.destination, state);
    add_vars(e, dest_r);
    const std::string& raw_dest = dest_r.text;
    if (raw_dest.empty() || raw_dest[0] != '/') e.context_reads.insert("workdir");
    std::string dest = expand_path(raw_dest, state);
    bool dir_dest = dest_is_directory(raw_dest, args.sources.size());
    for (const auto& src_raw : args.sources) {
        auto r = resolve_variables(src_raw, state);
        add_vars(e, r);
        const std::string& src = r.text;
        if (src.empty()) continue;
        if (instr.kind == InstructionKind::Add && is_url(src)) {
            e.context_paths.insert("remote:" + src);
        } else if (!e.misc.copy_from) {
            e.context_paths.insert(normalize_context_path(src));
        }
        if (dir_dest && !source_is_directory(src)) {
            std::string base = dest;
            if (base.back() != '/') base += '/';
            e.paths_out.insert(base + basename_of(src));
        } else {
            e.paths_out.insert(dest);
        }
    }
}

std::string single_value(const Instruction& instr) {
    if (const auto* v = std::get_if<SingleValue>(&instr.arguments)) return v->value;
    return {};
}

}  // namespace

Resolution resolve_variables(std::string_view text, const std::map<std::string, std::string>& vars) {
    Resolution r;
    std::string cur = protect_escapes(text);
    for (int pass = 0; pass < kMaxResolvePasses; ++pass) {
        std::string next = substitute_once(cur, vars, r);
        if (next == cur) break;
        cur = std::move(next);
    }
    r.text = restore_escapes(cur);
    return r;
}

Resolution resolve_variables(std::string_view text, const EnvState& state) {
    return resolve_variables(text, state.in_stage ? state.variables : state.global_args);
}

std::string expand_path(std::string_view pattern, std::string_view workdir) {
    if (pattern.empty()) return std::string(workdir.empty() ? "/" : workdir);
    bool trailing = pattern.back() == '/';
    std::string joined = pattern[0] == '/' ? std::string(pattern) : std::string(workdir) + "/" + std::string(pattern);
    std::vector<std::string> comps;
    for (auto& c : path_components(joined)) {
        if (c == "..") {
            if (!comps.empty()) comps.pop_back();
        } else {
            comps.push_back(std::move(c));
        }
    }
    std::string out = "/" + detail::join(comps, "/");
    if (trailing && out != "/") out += '/';
    return out;
}

std::string expand_path(std::string_view pattern, const EnvState& state) { return expand_path(pattern, state.workdir); }

std::string normalize_context_path(std::string_view p) {
    std::string s(p);
    while (s.rfind("./", 0) == 0) s.erase(0, 2);
    while (!s.empty() && s[0] == '/') s.erase(0, 1);
    if (s.empty()) return ".";
    return s;
}

EnvState fold_state(const EnvState& state, const Instruction& instr) {
    using K = InstructionKind;
    EnvState s = state;
    switch (instr.kind) {
        case K::From:
            s = EnvState{};
            s.global_args = state.global_args;
            s.in_stage = true;
            s.stage_index = instr.stage_index;
            break;
        case K::Arg: {
            const auto& kv = std::get<KeyValueList>(instr.arguments);
            for (const auto& p : kv.pairs) {
                if (!state.in_stage) {
                    s.global_args[p.key] = p.value ? resolve_variables(*p.value, state.global_args).text : "";
                } else if (p.value) {
                    s.variables[p.key] = resolve_variables(*p.value, state.variables).text;
                } else {
                    auto g = state.global_args.find(p.key);
                    s.variables[p.key] = g != state.global_args.end() ? g->second : "";
                }
            }
            break;
        }
        case K::Env: {
            const auto& kv = std::get<KeyValueList>(instr.arguments);
            for (const auto& p : kv.pairs)
                s.variables[p.key] = resolve_variables(p.value.value_or(""), state.variables).text;
            break;
        }
        case K::Workdir:
            s.workdir = strip_trailing_slash(expand_path(resolve_variables(single_value(instr), state).text, state.workdir));
            break;
        case K::User:
            s.user = resolve_variables(single_value(instr), state).text;
            if (s.user.empty()) s.user = state.user;
            break;
        case K::Shell:
            s.shell = std::get<ExecArray>(instr.arguments).items;
            break;
        default:
            break;
    }
    return s;
}

std::vector<EnvState> fold_all(const ParsedDockerfile& doc) {
    std::vector<EnvState> states;
    states.reserve(doc.instructions.size());
    EnvState s;
    for (const auto& instr : doc.instructions) {
        states.push_back(s);
        s = fold_state(s, instr);
    }
    return states;
}

SemanticElements extract_elements(const Instruction& instr, const EnvState& state, const CommandKnowledgeRegistry& registry) {
    using K = InstructionKind;
    SemanticElements e;
    e.user_read = state.user;
    switch (instr.kind) {
        case K::From: {
            e.misc.from = true;
            auto r = resolve_variables(from_image(instr), state.global_args);
            add_vars(e, r);
            e.misc.from_image = r.text;
            if (auto p = instr.flag("platform")) add_vars(e, resolve_variables(*p, state.global_args));
            break;
        }
        case K::Arg: {
            const auto& kv = std::get<KeyValueList>(instr.arguments);
            e.misc.global_arg = !state.in_stage;
            for (const auto& p : kv.pairs) {
                e.vars_defined.insert(p.key);
                if (p.value) add_vars(e, resolve_variables(*p.value, state));
                else if (state.in_stage && state.global_args.count(p.key)) e.vars_used.insert(p.key);
            }
            if (state.in_stage) e.context_writes.insert("env");
            break;
        }
        case K::Env: {
            const auto& kv = std::get<KeyValueList>(instr.arguments);
            for (const auto& p : kv.pairs) {
                e.vars_defined.insert(p.key);
                if (p.value) add_vars(e, resolve_variables(*p.value, state));
            }
            e.context_writes.insert("env");
            break;
        }
        case K::Label: {
            const auto& kv = std::get<KeyValueList>(instr.arguments);
            for (const auto& p : kv.pairs) {
                add_vars(e, resolve_variables(p.key, state));
                if (p.value) add_vars(e, resolve_variables(*p.value, state));
            }
            break;
        }
        case K::Copy:
        case K::Add:
            extract_copy(instr, state, e);
            break;
        case K::Workdir: {
            auto r = resolve_variables(single_value(instr), state);
            add_vars(e, r);
            if (r.text.empty() || r.text[0] != '/') e.context_reads.insert("workdir");
            std::string wd = strip_trailing_slash(expand_path(r.text, state.workdir));
            if (wd != "/") e.paths_out.insert(wd);
            e.context_writes.insert("workdir");
            break;
        }
        case K::User: {
            auto r = resolve_variables(single_value(instr), state);
            add_vars(e, r);
            e.user_written = r.text;
            e.paths_in.insert("/etc/passwd");
            e.context_writes.insert("user");
            break;
        }
        case K::Volume: {
            for (const auto& item : std::get<ExecArray>(instr.arguments).items) {
                auto r = resolve_variables(item, state);
                add_vars(e, r);
                if (r.text.empty()) continue;
                if (r.text[0] != '/') e.context_reads.insert("workdir");
                e.paths_out.insert(expand_path(r.text, state));
            }
            break;
        }
        case K::Run:
            extract_command(instr.arguments, state, registry, e, true);
            for (const auto& p : e.pkgs_installed) {
                auto tools = registry.tools_for(p);
                e.tools_provided.insert(tools.begin(), tools.end());
            }
            break;
        case K::Cmd:
        case K::Entrypoint:
            extract_command(instr.arguments, state, registry, e, false);
            break;
        case K::Healthcheck:
            e.misc.healthcheck = true;
            if (instr.healthcheck_cmd) extract_command(instr.arguments, state, registry, e, false);
            break;
        case K::Shell:
            e.context_writes.insert("shell");
            break;
        case K::Expose:
            for (const auto& item : std::get<ExecArray>(instr.arguments).items) add_vars(e, resolve_variables(item, state));
            break;
        case K::Stopsignal:
            e.misc.stopsignal = true;
            add_vars(e, resolve_variables(single_value(instr), state));
            break;
        case K::Onbuild:
            e.misc.onbuild = true;
            break;
        case K::Maintainer:
            e.misc.deprecated = true;
            break;
    }
    return e;
}

std::vector<SemanticElements> extract_all(const ParsedDockerfile& doc, const CommandKnowledgeRegistry& registry) {
    auto states = fold_all(doc);
    std::vector<SemanticElements> out;
    out.reserve(doc.instructions.size());
    for (std::size_t i = 0; i < doc.instructions.size(); ++i)
        out.push_back(extract_elements(doc.instructions[i], states[i], registry));
    return out;
}

}  // namespace dockorder

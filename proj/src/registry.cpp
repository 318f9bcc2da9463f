#include "dockorder/registry.hpp"

#include "dockorder/errors.hpp"
#include "text_util.hpp"

#include <fnmatch.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dockorder {

namespace detail {
extern const char* const kCommandsJson;
}

using nlohmann::json;

namespace {

std::vector<std::string> string_list(const json& j, const char* key) {
    std::vector<std::string> out;
    if (j.contains(key)) out = j.at(key).get<std::vector<std::string>>();
    return out;
}

EffectTemplate parse_template(const json& j) {
    EffectTemplate t;
    t.reads = string_list(j, "reads");
    t.writes = string_list(j, "writes");
    t.installs = string_list(j, "installs");
    t.removes = string_list(j, "removes");
    t.uses = string_list(j, "uses");
    if (j.contains("changes_dir")) t.changes_dir = j.at("changes_dir").get<std::string>();
    for (auto& f : string_list(j, "value_flags")) t.value_flags.insert(f);
    if (j.contains("subcommands"))
        for (auto& [name, sub] : j.at("subcommands").items()) t.subcommands[name] = parse_template(sub);
    return t;
}

bool looks_like_path(std::string_view w) {
    if (w.empty()) return false;
    if (w.find("://") != std::string_view::npos) return false;
    if (w[0] == '/' || w[0] == '.' || w[0] == '~') return true;
    for (std::string_view suffix : {".txt", ".whl", ".tar.gz", ".tgz", ".zip", ".deb", ".rpm", ".apk", ".gem", ".json"})
        if (w.size() > suffix.size() && w.substr(w.size() - suffix.size()) == suffix) return true;
    return false;
}

struct SplitArgs {
    std::vector<std::string> positionals;
    std::multimap<std::string, std::string> flag_values;
};

// Walk argv[begin..] separating flags, flag values and positionals.
SplitArgs split_args(const std::vector<std::string>& argv, std::size_t begin, const std::set<std::string>& value_flags) {
    SplitArgs out;
    bool only_positionals = false;
    for (std::size_t i = begin; i < argv.size(); ++i) {
        const std::string& w = argv[i];
        if (only_positionals || w.size() < 2 || w[0] != '-') {
            out.positionals.push_back(w);
            continue;
        }
        if (w == "--") {
            only_positionals = true;
            continue;
        }
        auto eq = w.find('=');
        if (eq != std::string::npos && w[1] == '-') {
            out.flag_values.emplace(w.substr(0, eq), w.substr(eq + 1));
            continue;
        }
        std::string name = w;
        // short cluster such as -xzf: the last letter may take a value
        if (w[1] != '-' && w.size() > 2 && !value_flags.count(w)) name = std::string("-") + w.back();
        if (value_flags.count(name)) {
            if (i + 1 < argv.size()) out.flag_values.emplace(name, argv[++i]);
        } else if (w[1] != '-' && w.size() > 2 && value_flags.count(w.substr(0, 2))) {
            out.flag_values.emplace(w.substr(0, 2), w.substr(2));  // -ofile
        }
    }
    return out;
}

std::vector<std::string> select(const std::string& selector, const SplitArgs& args) {
    const auto& p = args.positionals;
    std::vector<std::string> out;
    if (selector == "all") return p;
    if (selector == "first") {
        if (!p.empty()) out.push_back(p.front());
    } else if (selector == "last") {
        if (!p.empty()) out.push_back(p.back());
    } else if (selector == "all_but_last") {
        if (p.size() > 1) out.assign(p.begin(), p.end() - 1);
    } else if (selector == "rest") {
        if (p.size() > 1) out.assign(p.begin() + 1, p.end());
    } else if (selector.rfind("arg:", 0) == 0) {
        std::size_t n = std::stoul(selector.substr(4));
        if (n < p.size()) out.push_back(p[n]);
    } else if (selector.rfind("flag:", 0) == 0) {
        auto [lo, hi] = args.flag_values.equal_range(selector.substr(5));
        for (auto it = lo; it != hi; ++it) out.push_back(it->second);
    } else if (selector.rfind("path:", 0) == 0) {
        out.push_back(selector.substr(5));
    } else {
        throw Error(ErrorClass::user_input, "unknown selector in command registry: " + selector);
    }
    return out;
}

}  // namespace

std::string program_basename(std::string_view program) {
    auto slash = program.rfind('/');
    if (slash != std::string_view::npos) program = program.substr(slash + 1);
    return std::string(program);
}

std::string normalize_package(std::string_view name) {
    std::string s = detail::to_lower(detail::trim(name));
    std::size_t start = (!s.empty() && s[0] == '@') ? 1 : 0;  // npm scope
    std::size_t cut = s.find_first_of("=<>!~;[:", start);
    auto at = s.find('@', start);
    if (at != std::string::npos && at < cut) cut = at;
    if (cut != std::string::npos) s.resize(cut);
    while (!s.empty() && (s.back() == ',' || s.back() == ' ')) s.pop_back();
    return s;
}

CommandKnowledgeRegistry CommandKnowledgeRegistry::from_json(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("command registry: ") + e.what());
    }
    CommandKnowledgeRegistry r;
    try {
        for (auto& w : string_list(j, "wrappers")) r.wrappers_.insert(w);
        if (j.contains("aliases"))
            for (auto& [k, v] : j.at("aliases").items()) r.aliases_[k] = v.get<std::string>();
        if (j.contains("provides"))
            for (auto& [k, v] : j.at("provides").items())
                r.provides_.emplace_back(k, v.get<std::vector<std::string>>());
        if (j.contains("programs"))
            for (auto& [name, t] : j.at("programs").items()) r.programs_[name] = parse_template(t);
    } catch (const json::exception& e) {
        throw ParseError(std::string("command registry: ") + e.what());
    }
    return r;
}

CommandKnowledgeRegistry CommandKnowledgeRegistry::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read command registry " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

const CommandKnowledgeRegistry& CommandKnowledgeRegistry::builtin() {
    static const CommandKnowledgeRegistry instance = from_json(detail::kCommandsJson);
    return instance;
}

EffectTemplate CommandKnowledgeRegistry::lookup(std::string_view program, std::optional<std::string_view> subcommand) const {
    std::string name(program);
    if (auto a = aliases_.find(name); a != aliases_.end()) name = a->second;
    auto it = programs_.find(name);
    if (it == programs_.end()) {
        EffectTemplate unknown;
        unknown.known = false;
        return unknown;
    }
    EffectTemplate t = it->second;
    if (subcommand) {
        if (auto s = t.subcommands.find(std::string(*subcommand)); s != t.subcommands.end()) {
            EffectTemplate merged = s->second;
            merged.value_flags.insert(t.value_flags.begin(), t.value_flags.end());
            return merged;
        }
    }
    return t;
}

CommandEffects CommandKnowledgeRegistry::apply(const std::vector<std::string>& argv_in) const {
    CommandEffects fx;
    std::vector<std::string> argv = argv_in;

    // peel wrappers: sudo -u x cmd, env A=1 cmd, nohup cmd ...
    while (!argv.empty() && is_wrapper(program_basename(argv[0]))) {
        std::string w = program_basename(argv[0]);
        std::size_t i = 1;
        while (i < argv.size()) {
            const auto& a = argv[i];
            if (a.size() > 1 && a[0] == '-') {
                if (w == "sudo" && (a == "-u" || a == "-g")) ++i;
                ++i;
            } else if (w == "env" && a.find('=') != std::string::npos) {
                ++i;
            } else {
                break;
            }
        }
        argv.erase(argv.begin(), argv.begin() + static_cast<std::ptrdiff_t>(std::min(i, argv.size())));
    }
    if (argv.empty()) return fx;

    std::string program = program_basename(argv[0]);
    fx.uses.insert(detail::to_lower(program));

    // python -m pip install ...
    if ((program.rfind("python", 0) == 0) && argv.size() > 2 && argv[1] == "-m") {
        std::vector<std::string> rest(argv.begin() + 2, argv.end());
        auto inner = apply(rest);
        inner.uses.insert(fx.uses.begin(), fx.uses.end());
        return inner;
    }

    EffectTemplate base = lookup(program);
    if (!base.known) {
        fx.known = false;
        for (std::size_t i = 1; i < argv.size(); ++i)
            if (argv[i][0] != '-' && (argv[i].find('/') != std::string::npos || looks_like_path(argv[i])) &&
                argv[i].find("://") == std::string::npos)
                fx.reads.insert(argv[i]);
        return fx;
    }

    std::size_t begin = 1;
    EffectTemplate t = base;
    if (!base.subcommands.empty()) {
        auto pre = split_args(argv, 1, base.value_flags);
        if (!pre.positionals.empty()) {
            const std::string& sub = pre.positionals.front();
            t = lookup(program, sub);
            // skip past the subcommand word itself
            for (std::size_t i = 1; i < argv.size(); ++i) {
                if (argv[i] == sub) {
                    begin = i + 1;
                    break;
                }
            }
        }
    }
    SplitArgs args = split_args(argv, begin, t.value_flags);

    for (const auto& sel : t.reads)
        for (auto& v : select(sel, args)) fx.reads.insert(v);
    for (const auto& sel : t.writes)
        for (auto& v : select(sel, args)) fx.writes.insert(v);
    for (const auto* list : {&t.installs, &t.removes}) {
        for (const auto& sel : *list) {
            for (auto& v : select(sel, args)) {
                if (looks_like_path(v)) {
                    fx.reads.insert(v);
                } else {
                    auto p = normalize_package(v);
                    if (!p.empty()) fx.installs.insert(p);
                }
            }
        }
    }
    for (const auto& u : t.uses) fx.uses.insert(u);
    if (t.changes_dir) {
        auto d = select(*t.changes_dir, args);
        if (!d.empty()) fx.new_dir = d.front();
    }
    return fx;
}

std::set<std::string> CommandKnowledgeRegistry::tools_for(std::string_view package) const {
    std::set<std::string> out{std::string(package)};
    std::string pkg(package);
    for (const auto& [pattern, tools] : provides_)
        if (fnmatch(pattern.c_str(), pkg.c_str(), 0) == 0) out.insert(tools.begin(), tools.end());
    return out;
}

}  // namespace dockorder

#include "dockorder/dockerfile.hpp"

#include "dockorder/errors.hpp"
#include "text_util.hpp"

#include <array>
#include <nlohmann/json.hpp>
#include <regex>

namespace dockorder {

namespace {

using detail::iequals;
using detail::trim;

constexpr std::array<std::pair<InstructionKind, std::string_view>, kInstructionKindCount> kKeywords{{
    {InstructionKind::From, "FROM"},
    {InstructionKind::Arg, "ARG"},
    {InstructionKind::Env, "ENV"},
    {InstructionKind::Label, "LABEL"},
    {InstructionKind::Copy, "COPY"},
    {InstructionKind::Add, "ADD"},
    {InstructionKind::Workdir, "WORKDIR"},
    {InstructionKind::User, "USER"},
    {InstructionKind::Volume, "VOLUME"},
    {InstructionKind::Run, "RUN"},
    {InstructionKind::Shell, "SHELL"},
    {InstructionKind::Cmd, "CMD"},
    {InstructionKind::Entrypoint, "ENTRYPOINT"},
    {InstructionKind::Expose, "EXPOSE"},
    {InstructionKind::Onbuild, "ONBUILD"},
    {InstructionKind::Healthcheck, "HEALTHCHECK"},
    {InstructionKind::Stopsignal, "STOPSIGNAL"},
    {InstructionKind::Maintainer, "MAINTAINER"},
}};

struct Line {
    std::size_t begin = 0;  // byte offset of the line start
    std::size_t end = 0;    // byte offset past the line terminator
    std::string_view content;  // without "\n" and a trailing "\r"
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::size_t stop = nl == std::string_view::npos ? text.size() : nl;
        std::string_view content = text.substr(pos, stop - pos);
        if (!content.empty() && content.back() == '\r') content.remove_suffix(1);
        std::size_t end = nl == std::string_view::npos ? text.size() : nl + 1;
        lines.push_back({pos, end, content});
        pos = end;
    }
    return lines;
}

bool is_blank(std::string_view s) { return trim(s).empty(); }
bool is_comment(std::string_view s) {
    auto t = detail::trim_left(s);
    return !t.empty() && t.front() == '#';
}

bool kind_takes_flags(InstructionKind k) {
    switch (k) {
        case InstructionKind::From:
        case InstructionKind::Copy:
        case InstructionKind::Add:
        case InstructionKind::Run:
        case InstructionKind::Healthcheck:
            return true;
        default:
            return false;
    }
}

std::optional<std::vector<std::string>> parse_json_array(std::string_view s) {
    auto t = trim(s);
    if (t.empty() || t.front() != '[') return std::nullopt;
    auto j = nlohmann::json::parse(t.begin(), t.end(), nullptr, false);
    if (j.is_discarded() || !j.is_array()) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string()) return std::nullopt;
        out.push_back(item.get<std::string>());
    }
    return out;
}

/// Split into words honoring quotes and the escape character. Quotes and
/// escapes are kept in the words (unprocessed).
std::vector<std::string> split_quoted(std::string_view s, char escape) {
    std::vector<std::string> words;
    std::string cur;
    bool in_word = false;
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (quote) {
            cur += c;
            if (c == escape && quote == '"' && i + 1 < s.size()) {
                cur += s[++i];
            } else if (c == quote) {
                quote = 0;
            }
            continue;
        }
        if (detail::is_space(c)) {
            if (in_word) {
                words.push_back(cur);
                cur.clear();
                in_word = false;
            }
            continue;
        }
        in_word = true;
        cur += c;
        if (c == escape && i + 1 < s.size()) {
            cur += s[++i];
        } else if (c == '"' || c == '\'') {
            quote = c;
        }
    }
    if (in_word) words.push_back(cur);
    return words;
}

/// Quote removal for ENV/LABEL/ARG values: strips quotes and escape characters.
std::string process_quotes(std::string_view s, char escape) {
    std::string out;
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (quote == '\'') {
            if (c == '\'') quote = 0;
            else out += c;
        } else if (quote == '"') {
            if (c == '"') {
                quote = 0;
            } else if (c == escape && i + 1 < s.size() &&
                       (s[i + 1] == '"' || s[i + 1] == escape)) {
                out += s[++i];
            } else {
                out += c;
            }
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == escape && i + 1 < s.size()) {
            char next = s[i + 1];
            // keep "\$" as a literal-dollar marker for variable resolution
            if (next == '$') out += escape;
            out += next;
            ++i;
        } else {
            out += c;
        }
    }
    return out;
}

KeyValueList parse_key_values(std::string_view rest, InstructionKind kind, char escape, std::size_t line) {
    KeyValueList list;
    auto words = split_quoted(rest, escape);
    if (words.empty()) throw SyntaxError(line, std::string(to_string(kind)) + " requires at least one argument");
    bool any_eq = words.front().find('=') != std::string::npos;
    if (kind == InstructionKind::Arg) {
        for (const auto& w : words) {
            auto eq = w.find('=');
            KeyValue kv;
            kv.key = w.substr(0, eq);
            if (eq != std::string::npos) kv.value = process_quotes(std::string_view(w).substr(eq + 1), escape);
            if (kv.key.empty()) throw SyntaxError(line, "ARG names can not be blank");
            list.pairs.push_back(std::move(kv));
        }
        return list;
    }
    if (!any_eq) {
        // legacy "ENV key value" / "LABEL key value": value is the rest of the line
        auto t = trim(rest);
        std::size_t ws = 0;
        while (ws < t.size() && !detail::is_space(t[ws])) ++ws;
        KeyValue kv;
        kv.key = std::string(t.substr(0, ws));
        auto value = trim(t.substr(ws));
        if (value.empty() && kind == InstructionKind::Env)
            throw SyntaxError(line, "ENV must have two arguments");
        kv.value = process_quotes(value, escape);
        list.pairs.push_back(std::move(kv));
        list.legacy_form = true;
        return list;
    }
    for (const auto& w : words) {
        auto eq = w.find('=');
        if (eq == std::string::npos)
            throw SyntaxError(line, "syntax error - can't find = in \"" + w + "\". Must be of the form: name=value");
        KeyValue kv;
        kv.key = process_quotes(std::string_view(w).substr(0, eq), escape);
        if (kv.key.empty()) throw SyntaxError(line, std::string(to_string(kind)) + " names can not be blank");
        kv.value = process_quotes(std::string_view(w).substr(eq + 1), escape);
        list.pairs.push_back(std::move(kv));
    }
    return list;
}

ArgumentPayload parse_command_payload(std::string_view rest, bool heredoc) {
    if (!heredoc) {
        if (auto arr = parse_json_array(rest)) return ExecArray{*arr, true};
    }
    return ShellText{std::string(trim(rest)), heredoc};
}

const std::regex& heredoc_marker() {
    static const std::regex re(R"(<<(-?)(["']?)([A-Za-z_][A-Za-z0-9_]*)\2)");
    return re;
}

struct HeredocMarker {
    std::string delimiter;
    bool strip_tabs = false;
};

std::vector<HeredocMarker> find_heredocs(std::string_view logical) {
    std::vector<HeredocMarker> out;
    std::string s(logical);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), heredoc_marker()); it != std::sregex_iterator(); ++it) {
        auto pos = static_cast<std::size_t>(it->position(0));
        if (pos > 0 && s[pos - 1] == '<') continue;  // here-string "<<<"
        if (pos + 2 < s.size() && s[pos + 2] == '<') continue;
        out.push_back({(*it)[3].str(), (*it)[1].length() > 0});
    }
    return out;
}

void parse_payload(Instruction& instr, std::string_view rest, char escape, std::size_t line, bool heredoc) {
    using K = InstructionKind;
    const auto name = std::string(to_string(instr.kind));
    if (trim(rest).empty()) throw SyntaxError(line, name + " requires at least one argument");
    switch (instr.kind) {
        case K::Env:
        case K::Label:
        case K::Arg:
            instr.arguments = parse_key_values(rest, instr.kind, escape, line);
            return;
        case K::Copy:
        case K::Add: {
            PathArgs args;
            std::vector<std::string> items;
            if (auto arr = parse_json_array(rest)) {
                items = *arr;
                args.json = true;
            } else {
                items = detail::split_ws(rest);
            }
            if (items.size() < 2) throw SyntaxError(line, name + " requires at least two arguments");
            args.destination = items.back();
            items.pop_back();
            args.sources = std::move(items);
            instr.arguments = std::move(args);
            return;
        }
        case K::Run:
        case K::Cmd:
        case K::Entrypoint:
            instr.arguments = parse_command_payload(rest, heredoc);
            return;
        case K::Shell: {
            auto arr = parse_json_array(rest);
            if (!arr || arr->empty()) throw SyntaxError(line, "SHELL requires the arguments to be in JSON form");
            instr.arguments = ExecArray{*arr, true};
            return;
        }
        case K::Healthcheck: {
            auto t = trim(rest);
            auto words = detail::split_ws(t);
            if (words.size() == 1 && iequals(words[0], "NONE")) {
                instr.arguments = SingleValue{words[0]};
                return;
            }
            if (words.empty() || !iequals(words[0], "CMD"))
                throw SyntaxError(line, "HEALTHCHECK expects NONE or CMD <command>");
            auto cmd = trim(t.substr(3));
            if (cmd.empty()) throw SyntaxError(line, "HEALTHCHECK CMD requires a command");
            instr.healthcheck_cmd = true;
            instr.arguments = parse_command_payload(cmd, false);
            return;
        }
        case K::Volume:
            if (auto arr = parse_json_array(rest)) {
                instr.arguments = ExecArray{*arr, true};
            } else {
                instr.arguments = ExecArray{detail::split_ws(rest), false};
            }
            return;
        case K::Expose:
            instr.arguments = ExecArray{detail::split_ws(rest), false};
            return;
        case K::From: {
            auto words = detail::split_ws(rest);
            if (!(words.size() == 1 || (words.size() == 3 && iequals(words[1], "AS"))))
                throw SyntaxError(line, "FROM requires either one or three arguments");
            instr.arguments = SingleValue{std::string(trim(rest))};
            return;
        }
        case K::Workdir:
        case K::User:
        case K::Stopsignal:
        case K::Maintainer:
        case K::Onbuild:
            instr.arguments = SingleValue{std::string(trim(rest))};
            return;
    }
}

std::optional<Directive> match_directive(std::string_view line) {
    static const std::regex re(R"(^#\s*([a-zA-Z][a-zA-Z0-9]*)\s*=\s*(.+?)\s*$)");
    std::string s(trim(line));
    std::smatch m;
    if (!std::regex_match(s, m, re)) return std::nullopt;
    auto name = detail::to_lower(m[1].str());
    if (name != "syntax" && name != "escape" && name != "check") return std::nullopt;
    return Directive{name, m[2].str()};
}

}  // namespace

std::string_view to_string(InstructionKind kind) {
    for (const auto& [k, name] : kKeywords)
        if (k == kind) return name;
    return "?";
}

std::optional<InstructionKind> kind_from_keyword(std::string_view keyword) {
    for (const auto& [k, name] : kKeywords)
        if (iequals(keyword, name)) return k;
    return std::nullopt;
}

const std::vector<InstructionKind>& all_instruction_kinds() {
    static const std::vector<InstructionKind> kinds = [] {
        std::vector<InstructionKind> v;
        for (const auto& entry : kKeywords) v.push_back(entry.first);
        return v;
    }();
    return kinds;
}

std::optional<std::string> Instruction::flag(std::string_view name) const {
    for (const auto& f : flags)
        if (f.name == name) return f.value.value_or("");
    return std::nullopt;
}

bool same_structure(const Instruction& a, const Instruction& b) {
    return a.kind == b.kind && a.flags == b.flags && a.arguments == b.arguments &&
           a.stage_index == b.stage_index && a.index == b.index && a.healthcheck_cmd == b.healthcheck_cmd;
}

bool same_structure(const ParsedDockerfile& a, const ParsedDockerfile& b) {
    if (a.directives != b.directives || a.instructions.size() != b.instructions.size()) return false;
    for (std::size_t i = 0; i < a.instructions.size(); ++i)
        if (!same_structure(a.instructions[i], b.instructions[i])) return false;
    return true;
}

std::size_t ParsedDockerfile::first_from() const {
    for (std::size_t i = 0; i < instructions.size(); ++i)
        if (instructions[i].kind == InstructionKind::From) return i;
    return instructions.size();
}

ParsedDockerfile parse_dockerfile(std::string_view text) {
    ParsedDockerfile doc;
    const auto lines = split_lines(text);
    std::size_t li = 0;

    // parser directives: only before any comment, blank line or instruction
    std::size_t header_end = 0;
    while (li < lines.size()) {
        auto content = lines[li].content;
        if (li == 0 && content.starts_with("\xEF\xBB\xBF")) content.remove_prefix(3);
        auto d = match_directive(content);
        if (!d) break;
        bool repeated = false;
        for (const auto& seen : doc.directives) repeated |= seen.name == d->name;
        if (repeated) break;
        if (d->name == "escape") {
            if (d->value != "\\" && d->value != "`")
                throw SyntaxError(li + 1, "invalid escape token '" + d->value + "' does not match ` or \\");
            doc.escape = d->value[0];
        }
        doc.directives.push_back(*d);
        header_end = lines[li].end;
        ++li;
    }
    doc.directive_text = std::string(text.substr(0, header_end));

    const char escape = doc.escape;
    std::size_t chunk_start = header_end;
    std::size_t stage = 0;
    bool seen_from = false;

    while (li < lines.size()) {
        auto content = lines[li].content;
        if (li == 0 && content.starts_with("\xEF\xBB\xBF")) content.remove_prefix(3);
        if (is_blank(content) || is_comment(content)) {
            ++li;
            continue;
        }

        const std::size_t first = li;
        const std::size_t instr_begin = lines[li].begin;
        std::string logical;
        std::string_view cur = content;
        while (true) {
            auto trimmed = detail::trim_right(cur);
            bool continued = !trimmed.empty() && trimmed.back() == escape;
            if (!continued) {
                logical += cur;
                break;
            }
            trimmed.remove_suffix(1);
            logical += trimmed;
            ++li;
            // comments and blank lines inside a continuation are dropped
            while (li < lines.size() && (is_comment(lines[li].content) || is_blank(lines[li].content))) ++li;
            if (li >= lines.size()) {
                --li;
                break;
            }
            cur = lines[li].content;
        }

        auto body = detail::trim_left(logical);
        std::size_t kw_end = 0;
        while (kw_end < body.size() && !detail::is_space(body[kw_end])) ++kw_end;
        const std::string keyword(body.substr(0, kw_end));
        auto kind = kind_from_keyword(keyword);
        if (!kind) throw SyntaxError(first + 1, "unknown instruction: " + keyword);

        Instruction instr;
        instr.kind = *kind;
        instr.keyword = keyword;
        std::string_view rest = detail::trim_left(body.substr(kw_end));

        if (kind_takes_flags(instr.kind)) {
            while (rest.starts_with("--")) {
                std::size_t e = 0;
                while (e < rest.size() && !detail::is_space(rest[e])) ++e;
                auto token = rest.substr(2, e - 2);
                Flag f;
                auto eq = token.find('=');
                f.name = std::string(token.substr(0, eq));
                if (eq != std::string_view::npos) f.value = std::string(token.substr(eq + 1));
                if (f.name.empty()) throw SyntaxError(first + 1, "empty flag name");
                instr.flags.push_back(std::move(f));
                rest = detail::trim_left(rest.substr(e));
            }
        }

        std::string text_with_heredocs = logical;
        bool heredoc = false;
        if (instr.kind == InstructionKind::Run || instr.kind == InstructionKind::Copy ||
            instr.kind == InstructionKind::Add) {
            auto markers = find_heredocs(rest);
            for (const auto& marker : markers) {
                heredoc = true;
                bool closed = false;
                while (li + 1 < lines.size()) {
                    ++li;
                    auto l = lines[li].content;
                    text_with_heredocs += '\n';
                    text_with_heredocs += l;
                    auto cmp = marker.strip_tabs ? l.substr(std::min(l.find_first_not_of('\t'), l.size())) : l;
                    if (cmp == marker.delimiter) {
                        closed = true;
                        break;
                    }
                }
                if (!closed) throw SyntaxError(first + 1, "unterminated heredoc <<" + marker.delimiter);
            }
        }

        if (heredoc && instr.kind == InstructionKind::Run) {
            instr.arguments = ShellText{std::string(trim(rest)) + text_with_heredocs.substr(logical.size()), true};
        } else {
            parse_payload(instr, rest, escape, first + 1, heredoc);
        }

        if (instr.kind == InstructionKind::From) {
            if (seen_from) ++stage;
            seen_from = true;
        }
        instr.stage_index = stage;
        instr.index = doc.instructions.size();
        instr.text = std::string(detail::trim(text_with_heredocs));
        instr.span.start_line = first + 1;
        instr.span.end_line = li + 1;
        instr.span.raw_text = std::string(text.substr(chunk_start, lines[li].end - chunk_start));
        instr.span.instruction_offset = instr_begin - chunk_start;
        doc.instructions.push_back(std::move(instr));

        chunk_start = lines[li].end;
        ++li;
    }
    doc.trailing_comments = std::string(text.substr(chunk_start));
    return doc;
}

std::string format_instruction(const Instruction& instr) {
    std::string out = instr.keyword.empty() ? std::string(to_string(instr.kind)) : instr.keyword;
    for (const auto& f : instr.flags) {
        out += " --" + f.name;
        if (f.value) out += "=" + *f.value;
    }
    if (instr.kind == InstructionKind::Healthcheck && instr.healthcheck_cmd) out += " CMD";
    auto quote = [](const std::string& v) {
        std::string q = "\"";
        for (char c : v) {
            if (c == '"' || c == '\\') q += '\\';
            q += c;
        }
        return q + "\"";
    };
    std::visit(
        [&](const auto& payload) {
            using T = std::decay_t<decltype(payload)>;
            if constexpr (std::is_same_v<T, KeyValueList>) {
                if (payload.legacy_form && payload.pairs.size() == 1) {
                    out += " " + payload.pairs[0].key + " " + quote(payload.pairs[0].value.value_or(""));
                } else {
                    for (const auto& kv : payload.pairs) {
                        out += " " + kv.key;
                        if (kv.value) out += "=" + quote(*kv.value);
                    }
                }
            } else if constexpr (std::is_same_v<T, ShellText>) {
                out += " " + payload.text;
            } else if constexpr (std::is_same_v<T, ExecArray>) {
                if (payload.json) out += " " + nlohmann::json(payload.items).dump();
                else out += " " + detail::join(payload.items, " ");
            } else if constexpr (std::is_same_v<T, PathArgs>) {
                auto items = payload.sources;
                items.push_back(payload.destination);
                if (payload.json) out += " " + nlohmann::json(items).dump();
                else out += " " + detail::join(items, " ");
            } else {
                out += " " + payload.value;
            }
        },
        instr.arguments);
    return out;
}

std::string serialize(const ParsedDockerfile& doc) {
    std::vector<std::size_t> order(doc.instructions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return serialize(doc, order);
}

std::string serialize(const ParsedDockerfile& doc, const std::vector<std::size_t>& order) {
    std::string out = doc.directive_text;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& instr = doc.instructions.at(order[k]);
        std::string chunk = instr.span.raw_text.empty() ? format_instruction(instr) + "\n" : instr.span.raw_text;
        bool more_follows = k + 1 < order.size() || !doc.trailing_comments.empty();
        if (more_follows && !chunk.empty() && chunk.back() != '\n') chunk += '\n';
        out += chunk;
    }
    out += doc.trailing_comments;
    return out;
}

std::string from_image(const Instruction& from) {
    if (auto* v = std::get_if<SingleValue>(&from.arguments)) {
        auto words = detail::split_ws(v->value);
        if (!words.empty()) return words[0];
    }
    return {};
}

std::optional<std::string> from_alias(const Instruction& from) {
    if (auto* v = std::get_if<SingleValue>(&from.arguments)) {
        auto words = detail::split_ws(v->value);
        if (words.size() == 3) return words[2];
    }
    return std::nullopt;
}

}  // namespace dockorder

#include "dockorder/shell.hpp"

#include "dockorder/errors.hpp"
#include "text_util.hpp"

#include <array>
#include <optional>

namespace dockorder {

namespace {

constexpr std::array<std::string_view, 16> kReservedWords{
    "if", "then", "else", "elif", "fi", "for", "while", "until",
    "do", "done", "case", "esac", "function", "select", "!", "[["};

enum class TokenKind { Word, Operator, Redirect };

struct Token {
    TokenKind kind;
    std::string text;    // word text, operator text or redirect op
    std::string target;  // redirect target
    std::size_t offset;
};

bool is_operator_char(char c) { return c == '&' || c == '|' || c == ';' || c == '<' || c == '>' || c == '(' || c == ')'; }

class Lexer {
public:
    explicit Lexer(std::string_view text) : s_(text) {}

    std::vector<Token> run() {
        std::vector<Token> tokens;
        while (true) {
            skip_blanks();
            if (i_ >= s_.size()) break;
            char c = s_[i_];
            if (c == '\n') {
                tokens.push_back({TokenKind::Operator, ";", "", i_});
                ++i_;
                continue;
            }
            if (c == '#') {
                while (i_ < s_.size() && s_[i_] != '\n') ++i_;
                continue;
            }
            if (auto redirect = try_redirect(std::string())) {
                tokens.push_back(std::move(*redirect));
                continue;
            }
            if (is_operator_char(c)) {
                tokens.push_back(read_operator());
                continue;
            }
            std::size_t start = i_;
            std::string word = read_word();
            // "2>" style: a word made only of digits directly followed by a redirection
            if (!word.empty() && word.find_first_not_of("0123456789") == std::string::npos && i_ < s_.size() &&
                (s_[i_] == '>' || s_[i_] == '<')) {
                if (auto redirect = try_redirect(word)) {
                    redirect->offset = start;
                    tokens.push_back(std::move(*redirect));
                    continue;
                }
            }
            tokens.push_back({TokenKind::Word, std::move(word), "", start});
        }
        return tokens;
    }

private:
    void skip_blanks() {
        while (i_ < s_.size()) {
            if (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\r') {
                ++i_;
            } else if (s_[i_] == '\\' && i_ + 1 < s_.size() && s_[i_ + 1] == '\n') {
                i_ += 2;
            } else {
                break;
            }
        }
    }

    Token read_operator() {
        std::size_t start = i_;
        char c = s_[i_];
        auto peek = [&](std::size_t k) { return i_ + k < s_.size() ? s_[i_ + k] : '\0'; };
        if (c == '(' || c == ')') throw UnsupportedConstruct("subshell");
        if (c == '&') {
            if (peek(1) == '&') {
                i_ += 2;
                return {TokenKind::Operator, "&&", "", start};
            }
            throw UnsupportedConstruct("background job");
        }
        if (c == '|') {
            if (peek(1) == '|') {
                i_ += 2;
                return {TokenKind::Operator, "||", "", start};
            }
            if (peek(1) == '&') throw UnsupportedConstruct("pipe with stderr (|&)");
            ++i_;
            return {TokenKind::Operator, "|", "", start};
        }
        if (c == ';') {
            if (peek(1) == ';') throw UnsupportedConstruct("case terminator");
            ++i_;
            return {TokenKind::Operator, ";", "", start};
        }
        throw ShellParseError(start, std::string("unexpected '") + c + "'");
    }

    std::optional<Token> try_redirect(std::string prefix) {
        std::size_t start = i_;
        auto peek = [&](std::size_t k) { return i_ + k < s_.size() ? s_[i_ + k] : '\0'; };
        std::string op = prefix;
        char c = peek(0);
        if (c == '&' && peek(1) == '>') {
            op += "&>";
            i_ += 2;
            if (peek(0) == '>') {
                op += '>';
                ++i_;
            }
        } else if (c == '>') {
            if (peek(1) == '(') throw UnsupportedConstruct("process substitution");
            op += '>';
            ++i_;
            if (peek(0) == '>' || peek(0) == '|' || peek(0) == '&') {
                op += peek(0);
                ++i_;
            }
        } else if (c == '<') {
            if (peek(1) == '(') throw UnsupportedConstruct("process substitution");
            if (peek(1) == '<') {
                if (peek(2) == '<') throw UnsupportedConstruct("here-string");
                throw UnsupportedConstruct("heredoc");
            }
            op += '<';
            ++i_;
            if (peek(0) == '>' || peek(0) == '&') {
                op += peek(0);
                ++i_;
            }
        } else {
            return std::nullopt;
        }
        Token t{TokenKind::Redirect, op, "", start};
        skip_blanks();
        if (i_ >= s_.size() || s_[i_] == '\n' || is_operator_char(s_[i_]))
            throw ShellParseError(i_, "missing redirection target");
        t.target = read_word();
        if (t.target.empty()) throw ShellParseError(i_, "missing redirection target");
        return t;
    }

    std::string read_word() {
        std::string w;
        while (i_ < s_.size()) {
            char c = s_[i_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || is_operator_char(c)) break;
            if (c == '\\') {
                if (i_ + 1 < s_.size() && s_[i_ + 1] == '\n') {
                    i_ += 2;
                    continue;
                }
                w += c;
                ++i_;
                if (i_ < s_.size()) w += s_[i_++];
                continue;
            }
            if (c == '\'') {
                std::size_t q = i_;
                std::size_t close = s_.find('\'', i_ + 1);
                if (close == std::string_view::npos) throw ShellParseError(q, "unbalanced single quote");
                w += s_.substr(i_, close - i_ + 1);
                i_ = close + 1;
                continue;
            }
            if (c == '"') {
                std::size_t q = i_;
                w += c;
                ++i_;
                bool closed = false;
                while (i_ < s_.size()) {
                    char d = s_[i_];
                    if (d == '\\' && i_ + 1 < s_.size()) {
                        w += d;
                        w += s_[i_ + 1];
                        i_ += 2;
                        continue;
                    }
                    if (d == '`') throw UnsupportedConstruct("command substitution");
                    if (d == '$') {
                        read_dollar(w);
                        continue;
                    }
                    w += d;
                    ++i_;
                    if (d == '"') {
                        closed = true;
                        break;
                    }
                }
                if (!closed) throw ShellParseError(q, "unbalanced double quote");
                continue;
            }
            if (c == '`') throw UnsupportedConstruct("command substitution");
            if (c == '$') {
                read_dollar(w);
                continue;
            }
            w += c;
            ++i_;
        }
        return w;
    }

    void read_dollar(std::string& w) {
        auto peek = [&](std::size_t k) { return i_ + k < s_.size() ? s_[i_ + k] : '\0'; };
        if (peek(1) == '(') {
            if (peek(2) == '(') throw UnsupportedConstruct("arithmetic expansion");
            throw UnsupportedConstruct("command substitution");
        }
        if (peek(1) == '{') {
            std::size_t start = i_;
            int depth = 0;
            while (i_ < s_.size()) {
                char c = s_[i_];
                w += c;
                ++i_;
                if (c == '{') ++depth;
                if (c == '}' && --depth == 0) return;
            }
            throw ShellParseError(start, "unbalanced ${");
        }
        w += '$';
        ++i_;
    }

    std::string_view s_;
    std::size_t i_ = 0;
};

bool is_assignment(std::string_view w) {
    if (w.empty() || !detail::is_name_start(w[0])) return false;
    for (std::size_t i = 1; i < w.size(); ++i) {
        if (w[i] == '=') return true;
        if (!detail::is_name_char(w[i])) return false;
    }
    return false;
}

bool is_flag(std::string_view w) { return w.size() > 1 && w[0] == '-'; }

Connector connector_for(std::string_view op) {
    if (op == "&&") return Connector::And;
    if (op == "||") return Connector::Or;
    if (op == "|") return Connector::Pipe;
    return Connector::Sequence;
}

}  // namespace

std::string_view to_string(Connector c) {
    switch (c) {
        case Connector::And: return "and";
        case Connector::Or: return "or";
        case Connector::Pipe: return "pipe";
        case Connector::Sequence: return "sequence";
        case Connector::None: return "none";
    }
    return "none";
}

std::vector<SimpleCommand> parse_shell(std::string_view text) {
    auto tokens = Lexer(text).run();
    std::vector<SimpleCommand> commands;
    SimpleCommand cur;
    bool has_content = false;
    std::size_t last_op_offset = 0;
    bool pending_connector = false;

    auto finish = [&](std::size_t offset) {
        if (!has_content) throw ShellParseError(offset, "empty command");
        if (cur.program.empty()) {
            // only assignments: the first one stands in as the program word
            cur.program = cur.assignments.front();
            for (std::size_t i = 1; i < cur.assignments.size(); ++i) {
                cur.words.push_back(cur.assignments[i]);
                cur.positional_args.push_back(cur.assignments[i]);
            }
            cur.assignments.clear();
        }
        commands.push_back(std::move(cur));
        cur = SimpleCommand{};
        has_content = false;
    };

    for (const auto& tok : tokens) {
        switch (tok.kind) {
            case TokenKind::Word:
                if (cur.program.empty()) {
                    if (is_assignment(tok.text)) {
                        cur.assignments.push_back(tok.text);
                        has_content = true;
                        break;
                    }
                    for (auto rw : kReservedWords)
                        if (tok.text == rw) throw UnsupportedConstruct(std::string(rw));
                    if (tok.text == "{" || tok.text == "}") throw UnsupportedConstruct("brace group");
                    cur.program = tok.text;
                } else {
                    cur.words.push_back(tok.text);
                    (is_flag(tok.text) ? cur.flags : cur.positional_args).push_back(tok.text);
                }
                has_content = true;
                break;
            case TokenKind::Redirect:
                cur.redirections.push_back({tok.text, tok.target});
                has_content = true;
                break;
            case TokenKind::Operator:
                if (tok.text == ";" && !has_content && !pending_connector) {
                    break;  // stray separators / blank lines
                }
                if (!has_content) throw ShellParseError(tok.offset, "empty command before '" + tok.text + "'");
                if (cur.program.empty() && cur.assignments.empty())
                    throw ShellParseError(tok.offset, "redirection without a command");
                cur.connector_to_next = connector_for(tok.text);
                finish(tok.offset);
                pending_connector = tok.text != ";";
                last_op_offset = tok.offset;
                break;
        }
    }
    if (has_content) {
        if (cur.program.empty() && cur.assignments.empty())
            throw ShellParseError(text.size(), "redirection without a command");
        finish(text.size());
    } else if (pending_connector) {
        throw ShellParseError(last_op_offset, "dangling operator");
    }
    if (!commands.empty()) commands.back().connector_to_next = Connector::None;
    return commands;
}

std::string join_commands(const std::vector<SimpleCommand>& commands) {
    std::string out;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        const auto& c = commands[i];
        std::vector<std::string> parts = c.assignments;
        parts.push_back(c.program);
        parts.insert(parts.end(), c.words.begin(), c.words.end());
        for (const auto& r : c.redirections) {
            if (r.op.back() == '&') parts.push_back(r.op + r.target);
            else parts.push_back(r.op + " " + r.target);
        }
        out += detail::join(parts, " ");
        if (i + 1 < commands.size()) {
            switch (c.connector_to_next) {
                case Connector::And: out += " && "; break;
                case Connector::Or: out += " || "; break;
                case Connector::Pipe: out += " | "; break;
                default: out += "; "; break;
            }
        }
    }
    return out;
}

std::string unquote(std::string_view w) {
    std::string out;
    char quote = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        char c = w[i];
        if (quote == '\'') {
            if (c == '\'') quote = 0;
            else out += c;
        } else if (quote == '"') {
            if (c == '"') {
                quote = 0;
            } else if (c == '\\' && i + 1 < w.size() &&
                       (w[i + 1] == '"' || w[i + 1] == '\\' || w[i + 1] == '$' || w[i + 1] == '`')) {
                out += w[++i];
            } else {
                out += c;
            }
        } else if (c == '\'' || c == '"') {
            quote = c;
        } else if (c == '\\' && i + 1 < w.size()) {
            out += w[++i];
        } else {
            out += c;
        }
    }
    return out;
}

}  // namespace dockorder

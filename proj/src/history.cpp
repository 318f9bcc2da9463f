#include "dockorder/history.hpp"

#include "dockorder/errors.hpp"
#include "dockorder/path_trie.hpp"
#include "dockorder/process.hpp"
#include "dockorder/semantics.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace dockorder {

std::string_view to_string(ChangeKind k) {
    switch (k) {
        case ChangeKind::Addition: return "addition";
        case ChangeKind::Deletion: return "deletion";
        case ChangeKind::Modification: return "modification";
    }
    return "modification";
}

std::optional<ChangeKind> change_kind_from_string(std::string_view s) {
    for (auto k : {ChangeKind::Addition, ChangeKind::Deletion, ChangeKind::Modification})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

std::string_view to_string(MatchCategory c) {
    switch (c) {
        case MatchCategory::KeyValue: return "KeyValue";
        case MatchCategory::FileSystem: return "FileSystem";
        case MatchCategory::ShellScript: return "ShellScript";
        case MatchCategory::Special: return "Special";
    }
    return "Special";
}

MatchCategory classify(InstructionKind k) {
    using K = InstructionKind;
    switch (k) {
        case K::Arg:
        case K::Env:
        case K::User:
        case K::Expose:
        case K::Label: return MatchCategory::KeyValue;
        case K::Copy:
        case K::Add:
        case K::Volume:
        case K::Workdir:
        case K::Entrypoint: return MatchCategory::FileSystem;
        case K::Run:
        case K::Shell:
        case K::Cmd: return MatchCategory::ShellScript;
        case K::From:
        case K::Onbuild:
        case K::Healthcheck:
        case K::Stopsignal:
        case K::Maintainer: return MatchCategory::Special;
    }
    return MatchCategory::Special;
}

FrequencyTable FrequencyTable::uniform(std::size_t n) {
    FrequencyTable t;
    t.raw.assign(n, 0.0);
    t.normalized.assign(n, n ? 1.0 / static_cast<double>(n) : 0.0);
    return t;
}

// ---------------------------------------------------------------------------
// time

std::int64_t window_start(std::int64_t as_of, int window_months) {
    std::time_t t = static_cast<std::time_t>(as_of);
    std::tm tm{};
    gmtime_r(&t, &tm);
    int months = tm.tm_year * 12 + tm.tm_mon - window_months;
    tm.tm_year = months / 12;
    tm.tm_mon = months % 12;
    if (tm.tm_mon < 0) {
        tm.tm_mon += 12;
        tm.tm_year -= 1;
    }
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int year = tm.tm_year + 1900;
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    int limit = kDays[tm.tm_mon] + (tm.tm_mon == 1 && leap ? 1 : 0);
    tm.tm_mday = std::min(tm.tm_mday, limit);
    return static_cast<std::int64_t>(timegm(&tm));
}

std::vector<ModificationRecord> filter_window(const std::vector<ModificationRecord>& records, int window_months,
                                              std::int64_t as_of) {
    const auto start = window_start(as_of, window_months);
    std::vector<ModificationRecord> out;
    for (const auto& r : records)
        if (r.date >= start && r.date <= as_of) out.push_back(r);
    return out;
}

std::int64_t parse_timestamp(std::string_view s) {
    s = detail::trim(s);
    if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        return std::stoll(std::string(s));
    std::tm tm{};
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    std::string str(s);
    int n = std::sscanf(str.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &sec);
    if (n < 3) n = std::sscanf(str.c_str(), "%d-%d-%d %d:%d:%d", &y, &mo, &d, &h, &mi, &sec);
    if (n < 3 || mo < 1 || mo > 12 || d < 1 || d > 31) throw ParseError("bad timestamp: " + str);
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = sec;
    return static_cast<std::int64_t>(timegm(&tm));
}

// ---------------------------------------------------------------------------
// git plumbing

namespace {

std::string git_binary() { return env_or("DOCKORDER_GIT", "git"); }

ProcessResult git(const std::string& repo, std::vector<std::string> args, bool allow_failure = false) {
    std::vector<std::string> argv{git_binary(), "-c", "core.quotepath=off", "-C", repo};
    argv.insert(argv.end(), args.begin(), args.end());
    auto outcome = run_process(argv);
    if (outcome.exec_failed) throw GitUnavailable(git_binary() + ": " + outcome.exec_error);
    if (!allow_failure && outcome.result.exit_code != 0)
        throw Error(ErrorClass::external_tool, "git " + (args.empty() ? std::string() : args[0]) +
                                                   " failed: " + std::string(detail::trim(outcome.result.err)));
    return outcome.result;
}

struct Commit {
    std::string id;
    std::vector<std::string> parents;
    std::int64_t date = 0;
    std::vector<std::pair<char, std::string>> changes;  // (status letter, path)
};

std::vector<Commit> first_parent_log(const std::string& repo, const std::optional<std::string>& since) {
    std::vector<std::string> args{"log", "--first-parent", "--diff-merges=first-parent", "--no-renames",
                                  "--name-status", "--format=%x01%H %P%x02%ct"};
    args.push_back(since ? *since + "..HEAD" : "HEAD");
    auto res = git(repo, args);
    std::vector<Commit> commits;
    std::istringstream in(res.out);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '\x01') {
            Commit c;
            auto sep = line.find('\x02');
            auto ids = detail::split_ws(line.substr(1, sep - 1));
            if (ids.empty()) continue;
            c.id = ids[0];
            c.parents.assign(ids.begin() + 1, ids.end());
            c.date = std::stoll(line.substr(sep + 1));
            commits.push_back(std::move(c));
            continue;
        }
        if (commits.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        commits.back().changes.emplace_back(line[0], line.substr(tab + 1));
    }
    std::reverse(commits.begin(), commits.end());  // oldest first
    return commits;
}

struct Located {
    std::size_t start = 0, end = 0;
    std::string kind;
    std::string text;
    InstructionKind parsed_kind = InstructionKind::Run;
};

// Instruction spans of one revision; unparsable revisions fall back to one entry per line.
std::vector<Located> locate(const std::string& text) {
    std::vector<Located> out;
    try {
        auto doc = parse_dockerfile(text);
        for (const auto& ins : doc.instructions)
            out.push_back({ins.span.start_line, ins.span.end_line, std::string(to_string(ins.kind)), ins.text, ins.kind});
        return out;
    } catch (const SyntaxError&) {
    }
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        auto words = detail::split_ws(line);
        if (words.empty() || words[0][0] == '#') continue;
        auto kind = kind_from_keyword(words[0]);
        if (!kind) continue;
        out.push_back({n, n, std::string(to_string(*kind)), std::string(detail::trim(line)), *kind});
    }
    return out;
}

struct Hunk {
    std::size_t old_start, old_count, new_start, new_count;
};

std::vector<Hunk> parse_hunks(const std::string& diff) {
    static const std::regex re(R"(^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@)");
    std::vector<Hunk> out;
    std::istringstream in(diff);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_search(line, m, re)) continue;
        Hunk h;
        h.old_start = std::stoul(m[1]);
        h.old_count = m[2].matched ? std::stoul(m[2]) : 1;
        h.new_start = std::stoul(m[3]);
        h.new_count = m[4].matched ? std::stoul(m[4]) : 1;
        out.push_back(h);
    }
    return out;
}

// Instructions (indices into `spans`) touched by lines [first, first+count).
std::vector<std::pair<std::size_t, std::vector<std::size_t>>> touched(const std::vector<Located>& spans,
                                                                      std::size_t first, std::size_t count) {
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> out;
    for (std::size_t line = first; line < first + count; ++line) {
        for (std::size_t i = 0; i < spans.size(); ++i) {
            if (line < spans[i].start || line > spans[i].end) continue;
            if (out.empty() || out.back().first != i) out.push_back({i, {}});
            out.back().second.push_back(line);
        }
    }
    return out;
}

std::string show_file(const std::string& repo, const std::string& rev, const std::string& path) {
    auto r = git(repo, {"show", rev + ":" + path}, true);
    return r.exit_code == 0 ? r.out : std::string();
}

struct RepoPaths {
    std::string top;
    std::string dockerfile_rel;  // relative to top
    std::string context_rel;     // "" when the context is the repo root
};

RepoPaths resolve_paths(const std::string& repo_path, const std::string& dockerfile_path) {
    std::error_code ec;
    if (!fs::is_directory(repo_path, ec)) throw NotARepository(repo_path);
    auto probe = git(repo_path, {"rev-parse", "--is-inside-work-tree"}, true);
    if (probe.exit_code != 0 || detail::trim(probe.out) != "true") throw NotARepository(repo_path);
    RepoPaths p;
    p.top = std::string(detail::trim(git(repo_path, {"rev-parse", "--show-toplevel"}).out));
    fs::path df = dockerfile_path;
    if (df.is_relative()) df = fs::path(repo_path) / df;
    if (!fs::is_regular_file(df, ec)) throw DockerfileNotFound(dockerfile_path);
    auto rel = fs::relative(fs::weakly_canonical(df), fs::weakly_canonical(p.top), ec);
    if (ec || rel.empty() || *rel.begin() == "..") throw DockerfileNotFound(dockerfile_path + " (outside the repository)");
    p.dockerfile_rel = rel.generic_string();
    p.context_rel = rel.parent_path().generic_string();
    return p;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ChangeKind change_from_status(char s) {
    if (s == 'A') return ChangeKind::Addition;
    if (s == 'D') return ChangeKind::Deletion;
    return ChangeKind::Modification;
}

std::int64_t now_seconds() { return static_cast<std::int64_t>(std::time(nullptr)); }

}  // namespace

std::string head_commit(const std::string& repo_path) {
    return std::string(detail::trim(git(repo_path, {"rev-parse", "HEAD"}).out));
}

bool is_ancestor(const std::string& repo_path, const std::string& ancestor, const std::string& descendant) {
    return git(repo_path, {"merge-base", "--is-ancestor", ancestor, descendant}, true).exit_code == 0;
}

std::vector<std::string> address_list(const ParsedDockerfile& doc) {
    std::vector<std::string> out;
    auto states = fold_all(doc);
    for (std::size_t i = 0; i < doc.instructions.size(); ++i) {
        const auto& ins = doc.instructions[i];
        if (ins.kind != InstructionKind::Copy && ins.kind != InstructionKind::Add) continue;
        auto e = extract_elements(ins, states[i]);
        for (const auto& p : e.context_paths)
            if (p.rfind("remote:", 0) != 0 && std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    }
    return out;
}

std::vector<ModificationRecord> collect_history(const std::string& repo_path, const std::string& dockerfile_path,
                                                int window_months) {
    HistoryOptions o;
    o.window_months = window_months;
    return collect_history(repo_path, dockerfile_path, o);
}

std::vector<ModificationRecord> collect_history(const std::string& repo_path, const std::string& dockerfile_path,
                                                const HistoryOptions& opts) {
    if (opts.window_months < 1) throw Error(ErrorClass::user_input, "window_months must be at least 1");
    auto probe = run_process({git_binary(), "--version"});
    if (probe.exec_failed || probe.result.exit_code != 0) throw GitUnavailable(git_binary() + ": " + probe.exec_error);

    RepoPaths paths = resolve_paths(repo_path, dockerfile_path);
    const std::int64_t as_of = opts.as_of.value_or(now_seconds());
    const std::int64_t start = window_start(as_of, opts.window_months);

    // the maintained address list comes from the current Dockerfile
    ParsedDockerfile current;
    try {
        current = parse_dockerfile(read_text(fs::path(paths.top) / paths.dockerfile_rel));
    } catch (const SyntaxError&) {
    }
    std::vector<std::pair<std::string, std::size_t>> addresses;  // (pattern, instruction index)
    {
        auto states = fold_all(current);
        for (std::size_t i = 0; i < current.instructions.size(); ++i) {
            const auto& ins = current.instructions[i];
            if (ins.kind != InstructionKind::Copy && ins.kind != InstructionKind::Add) continue;
            for (const auto& p : extract_elements(ins, states[i]).context_paths)
                if (p.rfind("remote:", 0) != 0) addresses.emplace_back(p, i);
        }
    }

    std::vector<ModificationRecord> records;
    std::vector<Commit> commits;
    try {
        commits = first_parent_log(paths.top, opts.since_commit);
    } catch (const Error&) {
        // an empty repository has no HEAD yet
        if (git(paths.top, {"rev-parse", "--verify", "HEAD"}, true).exit_code != 0) return records;
        throw;
    }
    for (const auto& c : commits) {
        if (c.parents.empty()) continue;  // root commit has no predecessor to diff against
        if (c.date < start || c.date > as_of) continue;
        const std::string& parent = c.parents.front();
        bool dockerfile_changed = false;
        for (const auto& [status, path] : c.changes) {
            if (path == paths.dockerfile_rel) {
                dockerfile_changed = true;
                continue;
            }
            std::string rel = path;
            if (!paths.context_rel.empty()) {
                if (path.rfind(paths.context_rel + "/", 0) != 0) continue;
                rel = path.substr(paths.context_rel.size() + 1);
            }
            for (const auto& [pattern, index] : addresses) {
                if (!path_contains(pattern, rel)) continue;
                ModificationRecord r;
                r.commit_id = c.id;
                r.instruction_kind = "FILE";
                r.content = rel;
                r.date = c.date;
                r.change_kind = change_from_status(status);
                r.related_instruction_hint = index;
                records.push_back(std::move(r));
                break;
            }
        }
        if (!dockerfile_changed) continue;

        auto old_spans = locate(show_file(paths.top, parent, paths.dockerfile_rel));
        auto new_spans = locate(show_file(paths.top, c.id, paths.dockerfile_rel));
        auto diff = git(paths.top, {"diff", "-U0", "--no-color", "--no-ext-diff", parent, c.id, "--", paths.dockerfile_rel});
        std::map<std::size_t, ModificationRecord> by_new;  // new-side instruction -> record
        std::map<std::size_t, ModificationRecord> by_old;  // deletions
        for (const auto& h : parse_hunks(diff.out)) {
            auto olds = touched(old_spans, h.old_start, h.old_count);
            auto news = touched(new_spans, h.new_start, h.new_count);
            for (const auto& [i, lines] : news) {
                auto& r = by_new[i];
                if (r.commit_id.empty()) {
                    r.commit_id = c.id;
                    r.instruction_kind = new_spans[i].kind;
                    r.content = new_spans[i].text;
                    r.date = c.date;
                    r.change_kind = olds.empty() ? ChangeKind::Addition : ChangeKind::Modification;
                }
                r.line_numbers.insert(r.line_numbers.end(), lines.begin(), lines.end());
            }
            // old instructions without a new-side counterpart in this hunk were deleted
            for (std::size_t k = news.size(); k < olds.size(); ++k) {
                const auto& [i, lines] = olds[k];
                auto& r = by_old[i];
                if (r.commit_id.empty()) {
                    r.commit_id = c.id;
                    r.instruction_kind = old_spans[i].kind;
                    r.content = old_spans[i].text;
                    r.date = c.date;
                    r.change_kind = ChangeKind::Deletion;
                }
                r.line_numbers.insert(r.line_numbers.end(), lines.begin(), lines.end());
            }
        }
        for (auto& [_, r] : by_new) records.push_back(std::move(r));
        for (auto& [_, r] : by_old) records.push_back(std::move(r));
    }
    return records;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::ordered_json record_json(const ModificationRecord& r) {
    nlohmann::ordered_json j;
    j["commit_id"] = r.commit_id;
    j["instruction_kind"] = r.instruction_kind;
    j["content"] = r.content;
    j["date"] = r.date;
    j["change_kind"] = std::string(to_string(r.change_kind));
    j["line_numbers"] = r.line_numbers;
    j["related_instruction_hint"] = r.related_instruction_hint ? nlohmann::ordered_json(*r.related_instruction_hint)
                                                               : nlohmann::ordered_json(nullptr);
    return j;
}

ModificationRecord record_from(const nlohmann::json& j) {
    ModificationRecord r;
    r.commit_id = j.at("commit_id").get<std::string>();
    r.instruction_kind = j.at("instruction_kind").get<std::string>();
    r.content = j.at("content").get<std::string>();
    r.date = j.at("date").get<std::int64_t>();
    auto ck = change_kind_from_string(j.value("change_kind", std::string("modification")));
    if (!ck) throw ParseError("unknown change_kind");
    r.change_kind = *ck;
    if (j.contains("line_numbers")) r.line_numbers = j.at("line_numbers").get<std::vector<std::size_t>>();
    if (j.contains("related_instruction_hint") && !j.at("related_instruction_hint").is_null())
        r.related_instruction_hint = j.at("related_instruction_hint").get<std::size_t>();
    return r;
}

}  // namespace

std::string records_to_json(const std::vector<ModificationRecord>& records) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : records) arr.push_back(record_json(r));
    return arr.dump(2) + "\n";
}

std::vector<ModificationRecord> records_from_json(std::string_view text) {
    try {
        auto j = nlohmann::json::parse(text);
        const auto& arr = j.is_object() ? j.at("records") : j;
        std::vector<ModificationRecord> out;
        for (const auto& r : arr) out.push_back(record_from(r));
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("records JSON: ") + e.what());
    }
}

std::string cache_to_json(const RecordCache& c) {
    nlohmann::ordered_json j;
    j["head"] = c.head;
    j["dockerfile"] = c.dockerfile;
    j["window_months"] = c.window_months;
    j["mined_from"] = c.mined_from;
    j["addresses"] = c.addresses;
    j["records"] = nlohmann::ordered_json::array();
    for (const auto& r : c.records) j["records"].push_back(record_json(r));
    return j.dump(2) + "\n";
}

RecordCache cache_from_json(std::string_view text) {
    try {
        auto j = nlohmann::json::parse(text);
        RecordCache c;
        c.head = j.at("head").get<std::string>();
        c.dockerfile = j.at("dockerfile").get<std::string>();
        c.window_months = j.at("window_months").get<int>();
        c.mined_from = j.value("mined_from", std::int64_t{0});
        c.addresses = j.at("addresses").get<std::vector<std::string>>();
        for (const auto& r : j.at("records")) c.records.push_back(record_from(r));
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("record cache: ") + e.what());
    }
}

std::vector<ModificationRecord> collect_history_cached(const std::string& repo_path, const std::string& dockerfile_path,
                                                       const HistoryOptions& opts, const std::string& cache_path,
                                                       bool* reused) {
    if (reused) *reused = false;
    RepoPaths paths = resolve_paths(repo_path, dockerfile_path);
    const std::int64_t as_of = opts.as_of.value_or(now_seconds());
    const std::int64_t start = window_start(as_of, opts.window_months);
    ParsedDockerfile current;
    try {
        current = parse_dockerfile(read_text(fs::path(paths.top) / paths.dockerfile_rel));
    } catch (const SyntaxError&) {
    }
    RecordCache fresh;
    fresh.head = head_commit(paths.top);
    fresh.dockerfile = paths.dockerfile_rel;
    fresh.window_months = opts.window_months;
    fresh.mined_from = start;
    fresh.addresses = address_list(current);

    std::optional<RecordCache> cached;
    std::error_code ec;
    if (!cache_path.empty() && fs::exists(cache_path, ec)) {
        try {
            cached = cache_from_json(read_text(cache_path));
        } catch (const Error&) {
            cached.reset();
        }
    }
    bool compatible = cached && cached->dockerfile == fresh.dockerfile && cached->window_months == fresh.window_months &&
                      cached->addresses == fresh.addresses && cached->mined_from <= start;
    std::vector<ModificationRecord> records;
    if (compatible && cached->head == fresh.head) {
        records = cached->records;
        if (reused) *reused = true;
    } else if (compatible && is_ancestor(paths.top, cached->head, fresh.head)) {
        HistoryOptions inc = opts;
        inc.since_commit = cached->head;
        records = cached->records;
        auto more = collect_history(repo_path, dockerfile_path, inc);
        records.insert(records.end(), more.begin(), more.end());
        if (reused) *reused = true;
    } else {
        records = collect_history(repo_path, dockerfile_path, opts);
    }
    records = filter_window(records, opts.window_months, as_of);
    fresh.records = records;
    if (!cache_path.empty()) {
        std::ofstream out(cache_path, std::ios::binary);
        if (!out) throw IoError("cannot write record cache " + cache_path);
        out << cache_to_json(fresh);
    }
    return records;
}

// ---------------------------------------------------------------------------
// similarity

std::vector<std::string> shell_tokens(std::string_view text) {
    text = detail::trim(text);
    // drop the instruction keyword
    std::size_t i = 0;
    while (i < text.size() && !detail::is_space(text[i])) ++i;
    text = text.substr(i);
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(detail::to_lower(cur));
        cur.clear();
    };
    for (char c : text) {
        if (detail::is_space(c) || std::string_view(";&|<>()\"'`\\[],{}").find(c) != std::string_view::npos) flush();
        else cur += c;
    }
    flush();
    return out;
}

namespace {

std::map<std::string, std::size_t> term_counts(std::string_view text) {
    std::map<std::string, std::size_t> tf;
    for (auto& t : shell_tokens(text)) ++tf[t];
    return tf;
}

bool same_kind(const Instruction& c, const ModificationRecord& r) { return detail::iequals(to_string(c.kind), r.instruction_kind); }

std::optional<Instruction> parse_single(const std::string& text) {
    try {
        auto doc = parse_dockerfile(text);
        if (doc.instructions.size() == 1) return doc.instructions.front();
    } catch (const SyntaxError&) {
    }
    return std::nullopt;
}

std::set<std::string> keys_of(const Instruction& ins) {
    std::set<std::string> keys;
    if (const auto* kv = std::get_if<KeyValueList>(&ins.arguments))
        for (const auto& p : kv->pairs) keys.insert(p.key);
    return keys;
}

// Paths an instruction of the FileSystem category is matched on.
std::vector<std::string> match_paths(const Instruction& ins) {
    std::vector<std::string> out;
    if (const auto* p = std::get_if<PathArgs>(&ins.arguments)) {
        for (const auto& s : p->sources) out.push_back(normalize_context_path(s));
    } else if (const auto* e = std::get_if<ExecArray>(&ins.arguments)) {
        if (ins.kind == InstructionKind::Entrypoint) {
            if (!e->items.empty()) out.push_back(e->items.front());
        } else {
            out = e->items;
        }
    } else if (const auto* sh = std::get_if<ShellText>(&ins.arguments)) {
        auto words = detail::split_ws(sh->text);
        if (!words.empty()) out.push_back(words.front());
    } else if (const auto* v = std::get_if<SingleValue>(&ins.arguments)) {
        out.push_back(v->value);
    }
    return out;
}

}  // namespace

SimilarityModel::SimilarityModel(const ParsedDockerfile& doc, const std::vector<ModificationRecord>& records, double tau)
    : tau_(tau) {
    auto add_doc = [&](std::string_view text) {
        ++corpus_size_;
        for (const auto& [t, _] : term_counts(text)) ++df_[t];
    };
    for (const auto& ins : doc.instructions)
        if (classify(ins.kind) == MatchCategory::ShellScript) add_doc(ins.text);
    for (const auto& r : records) {
        if (r.implicit()) continue;
        auto kind = kind_from_keyword(r.instruction_kind);
        if (kind && classify(*kind) == MatchCategory::ShellScript) add_doc(r.content);
    }
}

double SimilarityModel::idf(const std::string& token) const {
    auto it = df_.find(token);
    double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + static_cast<double>(corpus_size_)) / (1.0 + df)) + 1.0;
}

std::map<std::string, double> SimilarityModel::weights(std::string_view text) const {
    std::map<std::string, double> w;
    for (const auto& [t, n] : term_counts(text)) w[t] = static_cast<double>(n) * idf(t);
    return w;
}

double SimilarityModel::cosine(std::string_view a, std::string_view b) const {
    auto ta = term_counts(a);
    auto tb = term_counts(b);
    if (ta.empty() || tb.empty()) return 0.0;
    if (ta == tb) return 1.0;
    auto wa = weights(a);
    auto wb = weights(b);
    double dot = 0, na = 0, nb = 0;
    for (const auto& [t, x] : wa) {
        na += x * x;
        if (auto it = wb.find(t); it != wb.end()) dot += x * it->second;
    }
    for (const auto& [_, y] : wb) nb += y * y;
    if (na == 0 || nb == 0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

double SimilarityModel::similarity(const Instruction& c, const ModificationRecord& r) const {
    if (r.implicit()) {
        if (c.kind != InstructionKind::Copy && c.kind != InstructionKind::Add) return 0.0;
        if (c.flag("from")) return 0.0;
        for (const auto& src : match_paths(c))
            if (path_contains(src, r.content)) return 1.0;
        return 0.0;
    }
    if (!same_kind(c, r)) return 0.0;
    switch (classify(c.kind)) {
        case MatchCategory::Special:
            return 1.0;
        case MatchCategory::KeyValue: {
            if (c.kind == InstructionKind::User || c.kind == InstructionKind::Expose) return 1.0;
            auto other = parse_single(r.content);
            if (!other) return 0.0;
            return keys_of(c) == keys_of(*other) ? 1.0 : 0.0;
        }
        case MatchCategory::FileSystem: {
            auto other = parse_single(r.content);
            if (!other) return 0.0;
            for (const auto& mine : match_paths(c))
                for (const auto& theirs : match_paths(*other))
                    if (path_contains(mine, theirs)) return 1.0;
            return 0.0;
        }
        case MatchCategory::ShellScript: {
            double s = cosine(c.text, r.content);
            return s < tau_ ? 0.0 : s;
        }
    }
    return 0.0;
}

std::vector<std::vector<double>> similarity_matrix(const ParsedDockerfile& doc,
                                                   const std::vector<ModificationRecord>& records, double tau) {
    SimilarityModel model(doc, records, tau);
    std::vector<std::vector<double>> m(doc.instructions.size(), std::vector<double>(records.size(), 0.0));
    for (std::size_t c = 0; c < doc.instructions.size(); ++c)
        for (std::size_t r = 0; r < records.size(); ++r) m[c][r] = model.similarity(doc.instructions[c], records[r]);
    return m;
}

FrequencyTable compute_frequencies_from_matrix(const std::vector<std::vector<double>>& sims,
                                               std::size_t total_modifications, int window_months) {
    const std::size_t n = sims.size();
    FrequencyTable t = FrequencyTable::uniform(n);
    t.total_modifications = total_modifications;
    t.window_months = window_months;
    if (total_modifications == 0) return t;
    double sum = 0;
    for (std::size_t c = 0; c < n; ++c) {
        double s = 0;
        for (double x : sims[c]) s += x;
        t.raw[c] = s / static_cast<double>(total_modifications);
        sum += t.raw[c];
    }
    if (sum > 0)
        for (std::size_t c = 0; c < n; ++c) t.normalized[c] = t.raw[c] / sum;
    return t;
}

FrequencyTable compute_frequencies(const ParsedDockerfile& doc, const std::vector<ModificationRecord>& records,
                                   int window_months, double tau) {
    return compute_frequencies_from_matrix(similarity_matrix(doc, records, tau), records.size(), window_months);
}

}  // namespace dockorder

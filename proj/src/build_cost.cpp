#include "dockorder/build_cost.hpp"

#include "dockorder/errors.hpp"
#include "dockorder/hash.hpp"
#include "dockorder/process.hpp"
#include "text_util.hpp"

#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dockorder {

std::string_view to_string(CostSource s) {
    switch (s) {
        case CostSource::Measured: return "measured";
        case CostSource::Loaded: return "loaded";
        case CostSource::Estimated: return "estimated";
    }
    return "estimated";
}

CostTable CostTable::uniform(std::size_t n, double value) {
    CostTable t;
    t.seconds.assign(n, value);
    t.source = CostSource::Estimated;
    return t;
}

std::string cost_table_to_json(const CostTable& t) {
    nlohmann::ordered_json j;
    j["source"] = std::string(to_string(t.source));
    j["repeats"] = t.repeats;
    j["low_confidence"] = t.low_confidence;
    nlohmann::ordered_json secs = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < t.seconds.size(); ++i) secs[std::to_string(i)] = t.seconds[i];
    j["seconds"] = secs;
    j["warnings"] = t.warnings;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// docker CLI

DockerCliAdapter::DockerCliAdapter(std::string binary)
    : binary_(binary.empty() ? env_or("DOCKORDER_DOCKER", "docker") : std::move(binary)) {}

namespace {

ProcessResult docker(const std::string& bin, const std::vector<std::string>& args) {
    std::vector<std::string> argv{bin};
    argv.insert(argv.end(), args.begin(), args.end());
    auto outcome = run_process(argv);
    if (outcome.exec_failed) throw RuntimeUnavailable(bin + ": " + outcome.exec_error);
    return outcome.result;
}

std::string tail(const std::string& s, std::size_t n) { return s.size() <= n ? s : s.substr(s.size() - n); }

}  // namespace

BuildResult DockerCliAdapter::build(const std::string& dockerfile_path, const std::string& context_dir) {
    auto r = docker(binary_, {"build", "--progress=plain", "--no-cache", "-f", dockerfile_path, context_dir});
    BuildResult out;
    out.ok = r.exit_code == 0;
    out.log = r.err + r.out;  // plain progress is written to stderr
    return out;
}

void DockerCliAdapter::prune_all() {
    auto r = docker(binary_, {"system", "prune", "-a", "-f"});
    if (r.exit_code != 0) throw RuntimeUnavailable("system prune failed: " + tail(r.err, 500));
    docker(binary_, {"builder", "prune", "-a", "-f"});
}

std::uint64_t DockerCliAdapter::disk_usage() {
    auto r = docker(binary_, {"system", "df", "--format", "{{.Type}}\t{{.Size}}"});
    if (r.exit_code != 0) throw RuntimeUnavailable("system df failed: " + tail(r.err, 500));
    std::uint64_t total = 0;
    std::istringstream in(r.out);
    std::string line;
    while (std::getline(in, line)) {
        auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        auto type = line.substr(0, tab);
        if (type == "Images" || type == "Build Cache") total += parse_size(line.substr(tab + 1));
    }
    return total;
}

std::uint64_t parse_size(std::string_view s) {
    s = detail::trim(s);
    std::size_t i = 0;
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
    if (i == 0) throw ParseError("bad size: " + std::string(s));
    double v = std::stod(std::string(s.substr(0, i)));
    std::string unit = detail::to_lower(detail::trim(s.substr(i)));
    double mult = 1;
    if (unit == "b" || unit.empty()) mult = 1;
    else if (unit == "kb") mult = 1e3;
    else if (unit == "mb") mult = 1e6;
    else if (unit == "gb") mult = 1e9;
    else if (unit == "tb") mult = 1e12;
    else if (unit == "kib") mult = 1024.0;
    else if (unit == "mib") mult = 1024.0 * 1024;
    else if (unit == "gib") mult = 1024.0 * 1024 * 1024;
    else throw ParseError("bad size unit: " + std::string(s));
    return static_cast<std::uint64_t>(std::llround(v * mult));
}

void cleanup_environment(BuilderAdapter& adapter) {
    adapter.prune_all();
    auto remaining = adapter.disk_usage();
    if (remaining != 0) throw CleanupIncomplete(remaining);
}

// ---------------------------------------------------------------------------
// logs

std::map<int, double> parse_buildkit_log(std::string_view log) {
    static const std::regex done(R"(^#(\d+) DONE (\d+(?:\.\d+)?)s)");
    std::map<int, double> out;
    std::istringstream in{std::string(log)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (std::regex_search(line, m, done)) out[std::stoi(m[1])] = std::stod(m[2]);
    }
    if (out.empty()) throw MalformedLog(log.empty() ? "empty log" : "no '#N DONE Ts' lines");
    return out;
}

namespace {

bool makes_layer(InstructionKind k) {
    using K = InstructionKind;
    return k == K::From || k == K::Run || k == K::Copy || k == K::Add || k == K::Workdir;
}

}  // namespace

StepAlignment align_steps(std::string_view log, const ParsedDockerfile& doc) {
    static const std::regex header(R"(^#(\d+) \[([^\]]+)\])");
    static const std::regex position(R"(^(?:(\S+) )?(\d+)/(\d+)$)");
    StepAlignment a;

    std::vector<std::vector<std::size_t>> layers;  // per stage, layer-producing instruction indices
    std::vector<std::optional<std::string>> aliases;
    std::optional<std::size_t> first_from;
    for (const auto& ins : doc.instructions) {
        if (ins.kind == InstructionKind::From) {
            if (!first_from) first_from = ins.index;
            layers.emplace_back();
            aliases.push_back(from_alias(ins));
        }
        if (!layers.empty() && makes_layer(ins.kind)) layers.back().push_back(ins.index);
    }
    auto stage_for = [&](const std::string& token) -> std::optional<std::size_t> {
        for (std::size_t s = 0; s < aliases.size(); ++s)
            if (aliases[s] && detail::iequals(*aliases[s], token)) return s;
        if (token.rfind("stage-", 0) == 0) {
            try {
                return static_cast<std::size_t>(std::stoul(token.substr(6)));
            } catch (const std::exception&) {
            }
        }
        return std::nullopt;
    };

    bool saw_header = false;
    std::istringstream in{std::string(log)};
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_search(line, m, header)) continue;
        saw_header = true;
        int step = std::stoi(m[1]);
        std::string label = m[2];
        if (label == "internal") {
            if (first_from) a.step_to_instruction.emplace(step, *first_from);
            continue;
        }
        std::smatch p;
        if (!std::regex_match(label, p, position)) continue;
        std::optional<std::size_t> stage = p[1].matched ? stage_for(p[1]) : std::optional<std::size_t>(0);
        if (!stage && layers.size() == 1) stage = 0;
        std::size_t k = std::stoul(p[2]);
        if (stage && *stage < layers.size() && k >= 1 && k <= layers[*stage].size())
            a.step_to_instruction[step] = layers[*stage][k - 1];
    }
    if (saw_header) return a;

    a.low_confidence = true;
    std::vector<std::size_t> flat;
    for (const auto& st : layers) flat.insert(flat.end(), st.begin(), st.end());
    static const std::regex done(R"(^#(\d+) DONE )");
    std::set<int> steps;
    std::istringstream again{std::string(log)};
    while (std::getline(again, line)) {
        std::smatch m;
        if (std::regex_search(line, m, done)) steps.insert(std::stoi(m[1]));
    }
    std::size_t i = 0;
    for (int s : steps) {
        if (i >= flat.size()) break;
        a.step_to_instruction[s] = flat[i++];
    }
    return a;
}

std::vector<double> attribute_durations(const std::map<int, double>& durations, const StepAlignment& alignment,
                                        std::size_t instruction_count) {
    std::vector<double> out(instruction_count, 0.0);
    for (const auto& [step, secs] : durations) {
        auto it = alignment.step_to_instruction.find(step);
        if (it != alignment.step_to_instruction.end() && it->second < instruction_count) out[it->second] += secs;
    }
    return out;
}

CostTable measure_costs(const ParsedDockerfile& doc, const std::string& dockerfile_path, const std::string& context_dir,
                        BuilderAdapter& adapter, int repeats) {
    if (repeats < 1) throw Error(ErrorClass::user_input, "repeats must be at least 1");
    const std::size_t n = doc.instructions.size();
    CostTable t;
    t.seconds.assign(n, 0.0);
    t.source = CostSource::Measured;
    t.repeats = repeats;
    for (int r = 0; r < repeats; ++r) {
        cleanup_environment(adapter);
        BuildResult res = adapter.build(dockerfile_path, context_dir);
        if (!res.ok) throw BuildFailed(tail(res.log, 4000));
        auto durations = parse_buildkit_log(res.log);
        StepAlignment alignment;
        if (res.step_map) {
            alignment.step_to_instruction = *res.step_map;
        } else {
            alignment = align_steps(res.log, doc);
        }
        t.low_confidence = t.low_confidence || alignment.low_confidence;
        auto per = attribute_durations(durations, alignment, n);
        for (std::size_t i = 0; i < n; ++i) t.seconds[i] += per[i];
    }
    for (auto& s : t.seconds) s /= static_cast<double>(repeats);
    if (t.low_confidence) t.warnings.push_back("build log had no step headers; steps were aligned positionally");
    return t;
}

// ---------------------------------------------------------------------------
// cost files

namespace {

CostTable load_impl(std::string_view json_text, std::size_t n, const ParsedDockerfile* doc) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("cost file: ") + e.what());
    }
    if (j.is_object() && j.contains("seconds")) j = j.at("seconds");
    std::vector<std::optional<double>> seen(n);
    auto put = [&](std::size_t index, const nlohmann::json& v) {
        if (!v.is_number()) throw ParseError("cost for instruction " + std::to_string(index) + " is not a number");
        double x = v.get<double>();
        if (!std::isfinite(x)) throw ParseError("cost for instruction " + std::to_string(index) + " is not finite");
        if (x < 0) throw NegativeCost(index);
        if (index >= n) throw ParseError("instruction index " + std::to_string(index) + " out of range");
        seen[index] = x;
    };
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) put(i, j[i]);
    } else if (j.is_object()) {
        std::map<std::string, std::size_t> by_hash;
        if (doc)
            for (const auto& ins : doc->instructions) by_hash.emplace("sha256:" + sha256_hex(ins.text), ins.index);
        for (auto& [key, value] : j.items()) {
            if (key.rfind("sha256:", 0) == 0) {
                auto it = by_hash.find(detail::to_lower(key));
                if (it == by_hash.end()) throw ParseError("no instruction matches " + key);
                put(it->second, value);
                continue;
            }
            std::size_t index = 0;
            try {
                std::size_t used = 0;
                index = std::stoul(key, &used);
                if (used != key.size()) throw std::invalid_argument(key);
            } catch (const std::exception&) {
                throw ParseError("bad cost key '" + key + "'");
            }
            put(index, value);
        }
    } else {
        throw ParseError("cost file must be a JSON object or array");
    }
    CostTable t;
    t.source = CostSource::Loaded;
    t.seconds.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (seen[i]) t.seconds[i] = *seen[i];
        else t.warnings.push_back("no cost for instruction " + std::to_string(i) + "; using 1.0");
    }
    return t;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

CostTable load_costs_from_json(std::string_view json_text, const ParsedDockerfile& doc) {
    return load_impl(json_text, doc.instructions.size(), &doc);
}

CostTable load_costs_from_json(std::string_view json_text, std::size_t instruction_count) {
    return load_impl(json_text, instruction_count, nullptr);
}

CostTable load_costs(const std::string& path, const ParsedDockerfile& doc) {
    return load_costs_from_json(read_file(path), doc);
}

CostTable load_costs(const std::string& path, std::size_t instruction_count) {
    return load_costs_from_json(read_file(path), instruction_count);
}

}  // namespace dockorder

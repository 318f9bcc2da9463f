#include "dockorder/graph.hpp"

#include "dockorder/errors.hpp"
#include "dockorder/path_trie.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace dockorder {

namespace {

using K = InstructionKind;

enum Category : unsigned { kVar = 1, kFile = 2, kUser = 4, kPkg = 8, kCtx = 16 };

unsigned write_mask(K k) {
    switch (k) {
        case K::Arg:
        case K::Env: return kVar;
        case K::Copy:
        case K::Add:
        case K::Volume: return kFile;
        case K::Workdir: return kFile | kCtx;
        case K::Run: return kFile | kPkg;
        case K::User: return kUser;
        case K::Shell: return kCtx;
        default: return 0;
    }
}

unsigned read_mask(K k) {
    switch (k) {
        case K::From:
        case K::Arg:
        case K::Env:
        case K::Label:
        case K::Expose:
        case K::Stopsignal: return kVar;
        case K::Copy:
        case K::Add: return kVar | kFile | kCtx;
        case K::Workdir:
        case K::Volume: return kVar | kCtx;
        case K::User: return kVar | kFile;
        case K::Run: return kVar | kFile | kUser | kPkg | kCtx;
        case K::Cmd:
        case K::Entrypoint:
        case K::Healthcheck: return kVar | kUser | kPkg | kCtx;
        default: return 0;
    }
}

bool last_one_wins(K k) {
    return k == K::Cmd || k == K::Entrypoint || k == K::User || k == K::Workdir || k == K::Shell ||
           k == K::Stopsignal || k == K::Healthcheck;
}

bool pinned_after_prior(K k) { return k == K::Healthcheck || k == K::Onbuild || k == K::Stopsignal; }

bool executes(K k) { return k == K::Run || k == K::Cmd || k == K::Entrypoint || k == K::Healthcheck; }

const std::set<std::string> kContextKeys{"workdir", "shell"};

std::string ref(std::size_t i) { return "#" + std::to_string(i); }

std::optional<std::string> first_overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
    for (const auto& x : a)
        for (const auto& y : b)
            if (paths_overlap(x, y)) return x == y ? x : x + " ~ " + y;
    return std::nullopt;
}

template <class Set>
std::optional<std::string> first_common(const Set& a, const Set& b) {
    for (const auto& x : a)
        if (b.count(x)) return x;
    return std::nullopt;
}

std::set<std::string> installed_and_provided(const SemanticElements& e) {
    std::set<std::string> s = e.pkgs_installed;
    s.insert(e.tools_provided.begin(), e.tools_provided.end());
    return s;
}

}  // namespace

std::string_view to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::Variable: return "Variable";
        case EdgeKind::FileDir: return "FileDir";
        case EdgeKind::User: return "User";
        case EdgeKind::Package: return "Package";
        case EdgeKind::Context: return "Context";
        case EdgeKind::Other: return "Other";
    }
    return "Other";
}

std::optional<EdgeKind> edge_kind_from_string(std::string_view s) {
    for (auto k : {EdgeKind::Variable, EdgeKind::FileDir, EdgeKind::User, EdgeKind::Package, EdgeKind::Context,
                   EdgeKind::Other})
        if (detail::iequals(to_string(k), s)) return k;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// DependencyGraph

namespace {
auto edge_key(const DependencyEdge& e) { return std::make_tuple(e.from_index, e.to_index, static_cast<int>(e.kind)); }
}  // namespace

bool DependencyGraph::add_edge(DependencyEdge e) {
    auto it = std::lower_bound(edges.begin(), edges.end(), e,
                               [](const DependencyEdge& x, const DependencyEdge& y) { return edge_key(x) < edge_key(y); });
    if (it != edges.end() && it->same_key(e)) return false;
    edges.insert(it, std::move(e));
    return true;
}

bool DependencyGraph::has_edge(std::size_t from, std::size_t to) const {
    return std::any_of(edges.begin(), edges.end(),
                       [&](const DependencyEdge& e) { return e.from_index == from && e.to_index == to; });
}

bool DependencyGraph::has_edge(std::size_t from, std::size_t to, EdgeKind kind) const {
    return std::any_of(edges.begin(), edges.end(), [&](const DependencyEdge& e) {
        return e.from_index == from && e.to_index == to && e.kind == kind;
    });
}

std::vector<std::vector<std::size_t>> DependencyGraph::successors() const {
    std::vector<std::vector<std::size_t>> out(nodes.size());
    for (const auto& e : edges) out[e.from_index].push_back(e.to_index);
    for (auto& v : out) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return out;
}

std::vector<std::vector<std::size_t>> DependencyGraph::predecessors() const {
    std::vector<std::vector<std::size_t>> out(nodes.size());
    for (const auto& e : edges) out[e.to_index].push_back(e.from_index);
    for (auto& v : out) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return out;
}

std::vector<std::size_t> DependencyGraph::indegrees() const {
    auto preds = predecessors();
    std::vector<std::size_t> out(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) out[i] = preds[i].size();
    return out;
}

bool DependencyGraph::is_acyclic() const {
    auto succ = successors();
    auto indeg = indegrees();
    std::deque<std::size_t> q;
    for (std::size_t i = 0; i < indeg.size(); ++i)
        if (indeg[i] == 0) q.push_back(i);
    std::size_t seen = 0;
    while (!q.empty()) {
        auto u = q.front();
        q.pop_front();
        ++seen;
        for (auto v : succ[u])
            if (--indeg[v] == 0) q.push_back(v);
    }
    return seen == nodes.size();
}

bool DependencyGraph::is_topological_order(const std::vector<std::size_t>& order) const {
    if (order.size() != nodes.size()) return false;
    std::vector<std::size_t> pos(nodes.size(), nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] >= nodes.size() || pos[order[i]] != nodes.size()) return false;
        pos[order[i]] = i;
    }
    return std::all_of(edges.begin(), edges.end(),
                       [&](const DependencyEdge& e) { return pos[e.from_index] < pos[e.to_index]; });
}

std::vector<bool> DependencyGraph::reachable_from(std::size_t from) const {
    auto succ = successors();
    std::vector<bool> seen(nodes.size(), false);
    std::vector<std::size_t> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
        auto u = stack.back();
        stack.pop_back();
        for (auto v : succ[u])
            if (!seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
    }
    return seen;
}

bool DependencyGraph::operator==(const DependencyGraph& o) const {
    if (nodes.size() != o.nodes.size() || edges.size() != o.edges.size()) return false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& a = nodes[i];
        const auto& b = o.nodes[i];
        if (a.index != b.index || a.instr.kind != b.instr.kind || a.instr.stage_index != b.instr.stage_index ||
            a.segment() != b.segment())
            return false;
    }
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (!edges[i].same_key(o.edges[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// PairJudge

struct PairJudge::Reach {
    std::map<std::string, std::size_t> var_binding;               // used name -> definer
    std::map<std::string, std::optional<std::size_t>> prev_def;   // defined name -> previous definer
    std::optional<std::size_t> user_writer;
    std::map<std::string, std::size_t> ctx_writer;                // context key -> latest writer
    std::optional<std::size_t> prev_same_kind;
    std::optional<std::size_t> source_stage_last;
    std::string source_stage_name;
};

PairJudge::~PairJudge() = default;

PairJudge::PairJudge(const std::vector<GraphNode>& nodes, GraphOptions opts) : nodes_(nodes), opts_(opts) {
    reach_.resize(nodes.size());
    // alias / ordinal of each stage, mapped to its FROM position
    std::vector<std::pair<std::size_t, std::optional<std::string>>> stages;  // (FROM position, alias)
    for (std::size_t b = 0; b < nodes.size(); ++b) {
        const auto& B = nodes[b];
        const auto& eb = B.elements;
        auto& r = reach_[b];
        const auto seg = B.segment();

        for (const auto& name : eb.vars_used) {
            std::optional<std::size_t> def;
            for (std::size_t j = b; j-- > 0;) {
                if (nodes[j].segment() == seg && nodes[j].elements.vars_defined.count(name)) {
                    def = j;
                    break;
                }
            }
            bool sees_globals = eb.misc.from || (B.instr.kind == K::Arg && eb.vars_defined.count(name));
            if (!def && sees_globals) {
                for (std::size_t j = b; j-- > 0;) {
                    if (nodes[j].segment() == 0 && nodes[j].elements.vars_defined.count(name)) {
                        def = j;
                        break;
                    }
                }
            }
            if (def) r.var_binding[name] = *def;
        }
        for (const auto& name : eb.vars_defined) {
            std::optional<std::size_t> prev;
            for (std::size_t j = b; j-- > 0;) {
                if (nodes[j].segment() == seg && nodes[j].elements.vars_defined.count(name)) {
                    prev = j;
                    break;
                }
            }
            r.prev_def[name] = prev;
        }
        for (std::size_t j = b; j-- > 0;) {
            if (nodes[j].segment() != seg) continue;
            const auto& ej = nodes[j].elements;
            if (!r.user_writer && ej.user_written) r.user_writer = j;
            for (const auto& key : ej.context_writes)
                if (kContextKeys.count(key) && !r.ctx_writer.count(key)) r.ctx_writer[key] = j;
            if (!r.prev_same_kind && last_one_wins(B.instr.kind) && nodes[j].instr.kind == B.instr.kind)
                r.prev_same_kind = j;
        }

        // cross-stage sources: COPY --from=<stage> and FROM <earlier alias>
        std::optional<std::string> source;
        if (eb.misc.copy_from) source = eb.misc.copy_from;
        if (eb.misc.from && eb.misc.from_image) source = eb.misc.from_image;
        if (source) {
            std::optional<std::size_t> stage_pos;  // ordinal into `stages`
            for (std::size_t k = 0; k < stages.size(); ++k) {
                const auto& alias = stages[k].second;
                if ((alias && detail::iequals(*alias, *source)) || (!eb.misc.from && *source == std::to_string(k)))
                    stage_pos = k;
            }
            if (stage_pos) {
                std::size_t from_pos = stages[*stage_pos].first;
                std::size_t source_seg = nodes[from_pos].segment();
                for (std::size_t j = b; j-- > 0;) {
                    if (nodes[j].segment() == source_seg) {
                        r.source_stage_last = j;
                        break;
                    }
                }
                r.source_stage_name = *source;
            }
        }
        if (eb.misc.from) stages.emplace_back(b, from_alias(B.instr));
    }
}

bool PairJudge::kinds_may_depend(InstructionKind a, InstructionKind b, bool anti) {
    if (a == K::From || pinned_after_prior(b)) return true;
    if (a == b && last_one_wins(a)) return true;
    if (write_mask(a) & read_mask(b)) return true;
    if (anti && ((read_mask(a) & write_mask(b)) || (write_mask(a) & write_mask(b)))) return true;
    return false;
}

std::vector<DependencyEdge> PairJudge::judge(std::size_t a, std::size_t b) const {
    std::vector<DependencyEdge> out;
    if (a >= b || b >= nodes_.size()) return out;
    const auto& A = nodes_[a];
    const auto& B = nodes_[b];
    const auto& ea = A.elements;
    const auto& eb = B.elements;
    const auto& r = reach_[b];
    const bool anti = opts_.anti_dependencies;
    auto add = [&](EdgeKind k, std::string why) {
        for (const auto& e : out)
            if (e.kind == k) return;
        out.push_back({A.index, B.index, k, std::move(why)});
    };

    // rules that may cross segments
    if (eb.misc.from && ea.misc.global_arg) add(EdgeKind::Other, "global ARG at " + ref(A.index) + " precedes every FROM");
    if (r.source_stage_last == a) add(EdgeKind::Other, "builds on stage '" + r.source_stage_name + "' ending at " + ref(A.index));
    for (const auto& [name, def] : r.var_binding)
        if (def == a) add(EdgeKind::Variable, "uses var " + name + " defined at " + ref(A.index));

    if (A.segment() != B.segment()) return out;
    const bool opaque = ea.misc.opaque || eb.misc.opaque;
    if (!opaque && !kinds_may_depend(A.instr.kind, B.instr.kind, anti)) return out;

    // Other
    if (ea.misc.from) add(EdgeKind::Other, "stage FROM at " + ref(A.index));
    if (pinned_after_prior(B.instr.kind)) add(EdgeKind::Other, std::string(to_string(B.instr.kind)) + " stays after " + ref(A.index));
    if (r.prev_same_kind == a) add(EdgeKind::Other, "later " + std::string(to_string(B.instr.kind)) + " overrides " + ref(A.index));

    // FileDir
    if (auto p = first_overlap(eb.paths_in, ea.paths_out)) add(EdgeKind::FileDir, "reads " + *p + " written at " + ref(A.index));
    if (ea.misc.opaque && (!eb.paths_in.empty() || eb.misc.opaque))
        add(EdgeKind::FileDir, "opaque shell at " + ref(A.index) + " may write any path");
    if (eb.misc.opaque && !ea.paths_out.empty()) add(EdgeKind::FileDir, "opaque shell may read paths written at " + ref(A.index));
    if (anti) {
        if (auto p = first_overlap(ea.paths_in, eb.paths_out))
            add(EdgeKind::FileDir, "overwrites " + *p + " read at " + ref(A.index));
        if (auto p = first_overlap(ea.paths_out, eb.paths_out))
            add(EdgeKind::FileDir, "overwrites " + *p + " written at " + ref(A.index));
        if (ea.misc.opaque && !eb.paths_out.empty())
            add(EdgeKind::FileDir, "writes after opaque shell at " + ref(A.index));
        if (eb.misc.opaque && !ea.paths_in.empty())
            add(EdgeKind::FileDir, "opaque shell may overwrite paths read at " + ref(A.index));
    }

    // User
    if (executes(B.instr.kind) && r.user_writer == a)
        add(EdgeKind::User, "runs as " + ea.user_written.value_or("") + " set at " + ref(A.index));
    if (anti && eb.user_written && executes(A.instr.kind) && (!r.user_writer || a > *r.user_writer))
        add(EdgeKind::User, "changes the user " + ref(A.index) + " runs as");

    // Package
    auto provided_a = installed_and_provided(ea);
    if (auto p = first_common(eb.pkgs_used, provided_a)) add(EdgeKind::Package, "uses " + *p + " installed at " + ref(A.index));
    if (eb.misc.opaque && !ea.pkgs_installed.empty()) add(EdgeKind::Package, "opaque shell after install at " + ref(A.index));
    if (anti) {
        auto provided_b = installed_and_provided(eb);
        if (auto p = first_common(ea.pkgs_used, provided_b))
            add(EdgeKind::Package, "reinstalls " + *p + " used at " + ref(A.index));
        if (auto p = first_common(ea.pkgs_installed, eb.pkgs_installed))
            add(EdgeKind::Package, "reinstalls " + *p + " installed at " + ref(A.index));
    }

    // Context
    for (const auto& key : eb.context_reads) {
        auto w = r.ctx_writer.find(key);
        if (w != r.ctx_writer.end() && w->second == a) add(EdgeKind::Context, "reads " + key + " set at " + ref(A.index));
    }
    if (eb.misc.opaque && first_common(ea.context_writes, kContextKeys))
        add(EdgeKind::Context, "opaque shell after context change at " + ref(A.index));
    if (anti) {
        for (const auto& key : eb.context_writes) {
            if (!kContextKeys.count(key) || !ea.context_reads.count(key)) continue;
            auto w = r.ctx_writer.find(key);
            if (w == r.ctx_writer.end() || a > w->second)
                add(EdgeKind::Context, "changes " + key + " read at " + ref(A.index));
        }
    }

    // Variable anti-dependencies
    if (anti) {
        for (const auto& [name, prev] : r.prev_def) {
            if (prev == a) add(EdgeKind::Variable, "redefines var " + name + " defined at " + ref(A.index));
            bool reads = ea.vars_used.count(name) || ea.vars_unresolved.count(name);
            if (reads && (!prev || a > *prev))
                add(EdgeKind::Variable, "redefines var " + name + " used at " + ref(A.index));
        }
    }
    return out;
}

std::vector<DependencyEdge> judge_pair(const GraphNode& a, const GraphNode& b, GraphOptions opts) {
    std::vector<GraphNode> pair{a, b};
    PairJudge judge(pair, opts);
    return judge.judge(0, 1);
}

DependencyGraph build_graph(const ParsedDockerfile& doc, const std::vector<SemanticElements>& elements, GraphOptions opts) {
    if (elements.size() != doc.instructions.size())
        throw Error(ErrorClass::internal, "element list does not match instruction count");
    DependencyGraph g;
    g.nodes.reserve(doc.instructions.size());
    for (std::size_t i = 0; i < doc.instructions.size(); ++i) g.nodes.push_back({i, doc.instructions[i], elements[i]});
    PairJudge judge(g.nodes, opts);
    std::vector<DependencyEdge> all;
    for (std::size_t b = 0; b < g.nodes.size(); ++b)
        for (std::size_t a = 0; a < b; ++a)
            for (auto& e : judge.judge(a, b)) all.push_back(std::move(e));
    std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return edge_key(x) < edge_key(y); });
    for (auto& e : all) {
        if (e.from_index >= e.to_index)
            throw CyclicDependency("back edge " + ref(e.from_index) + " -> " + ref(e.to_index));
        if (g.edges.empty() || !g.edges.back().same_key(e)) g.edges.push_back(std::move(e));
    }
    return g;
}

DependencyGraph build_graph(const ParsedDockerfile& doc, GraphOptions opts) {
    return build_graph(doc, extract_all(doc), opts);
}

// ---------------------------------------------------------------------------
// export / import

namespace {

std::string dot_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

}  // namespace

std::string export_graph(const DependencyGraph& g, GraphFormat format) {
    if (format == GraphFormat::Dot) {
        std::ostringstream os;
        os << "digraph dockerfile {\n";
        for (const auto& n : g.nodes)
            os << "  n" << n.index << " [label=\"#" << n.index << ' ' << to_string(n.instr.kind) << "\"];\n";
        for (const auto& e : g.edges)
            os << "  n" << e.from_index << " -> n" << e.to_index << " [label=\"" << to_string(e.kind)
               << "\", tooltip=\"" << dot_escape(e.evidence) << "\"];\n";
        os << "}\n";
        return os.str();
    }
    nlohmann::ordered_json j;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes) {
        nlohmann::ordered_json node;
        node["index"] = n.index;
        node["kind"] = std::string(to_string(n.instr.kind));
        node["stage"] = n.instr.stage_index;
        node["global_arg"] = n.elements.misc.global_arg;
        node["line"] = n.instr.span.start_line;
        node["text"] = n.instr.text;
        j["nodes"].push_back(std::move(node));
    }
    j["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : g.edges) {
        nlohmann::ordered_json edge;
        edge["from"] = e.from_index;
        edge["to"] = e.to_index;
        edge["kind"] = std::string(to_string(e.kind));
        edge["evidence"] = e.evidence;
        j["edges"].push_back(std::move(edge));
    }
    return j.dump(2) + "\n";
}

DependencyGraph import_graph_json(std::string_view json_text) {
    DependencyGraph g;
    try {
        auto j = nlohmann::json::parse(json_text);
        for (const auto& node : j.at("nodes")) {
            GraphNode n;
            n.index = node.at("index").get<std::size_t>();
            auto kind = kind_from_keyword(node.at("kind").get<std::string>());
            if (!kind) throw ParseError("unknown instruction kind in graph JSON");
            n.instr.kind = *kind;
            n.instr.keyword = node.at("kind").get<std::string>();
            n.instr.index = n.index;
            n.instr.stage_index = node.value("stage", std::size_t{0});
            n.instr.text = node.value("text", std::string());
            n.instr.span.start_line = n.instr.span.end_line = node.value("line", std::size_t{0});
            n.elements.misc.global_arg = node.value("global_arg", false);
            g.nodes.push_back(std::move(n));
        }
        for (const auto& edge : j.at("edges")) {
            auto kind = edge_kind_from_string(edge.at("kind").get<std::string>());
            if (!kind) throw ParseError("unknown edge kind in graph JSON");
            DependencyEdge e{edge.at("from").get<std::size_t>(), edge.at("to").get<std::size_t>(), *kind,
                             edge.value("evidence", std::string())};
            if (e.from_index >= g.nodes.size() || e.to_index >= g.nodes.size())
                throw ParseError("edge endpoint out of range in graph JSON");
            g.add_edge(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("graph JSON: ") + ex.what());
    }
    return g;
}

}  // namespace dockorder

#include "dockorder/path_trie.hpp"

#include <fnmatch.h>

namespace dockorder {

struct PathTrie::Node {
    std::map<std::string, std::unique_ptr<Node>> children;
    std::set<std::size_t> tags;
};

namespace {

bool has_glob(std::string_view s) { return s.find_first_of("*?[") != std::string_view::npos; }

}  // namespace

std::vector<std::string> path_components(std::string_view path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i <= path.size()) {
        std::size_t j = path.find('/', i);
        if (j == std::string_view::npos) j = path.size();
        std::string_view c = path.substr(i, j - i);
        if (!c.empty() && c != ".") out.emplace_back(c);
        i = j + 1;
    }
    return out;
}

bool component_matches(std::string_view a, std::string_view b) {
    if (a == b) return true;
    std::string sa(a), sb(b);
    if (has_glob(a) && fnmatch(sa.c_str(), sb.c_str(), 0) == 0) return true;
    if (has_glob(b) && fnmatch(sb.c_str(), sa.c_str(), 0) == 0) return true;
    return false;
}

bool path_contains(std::string_view parent, std::string_view child) {
    auto p = path_components(parent);
    auto c = path_components(child);
    if (p.size() > c.size()) return false;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (!component_matches(p[i], c[i])) return false;
    return true;
}

PathTrie::PathTrie() : root_(std::make_unique<Node>()) {}
PathTrie::~PathTrie() = default;
PathTrie::PathTrie(PathTrie&&) noexcept = default;
PathTrie& PathTrie::operator=(PathTrie&&) noexcept = default;

void PathTrie::insert(std::string_view pattern, std::size_t tag) {
    Node* n = root_.get();
    for (auto& c : path_components(pattern)) {
        auto& child = n->children[c];
        if (!child) child = std::make_unique<Node>();
        n = child.get();
    }
    n->tags.insert(tag);
}

namespace {

void collect_all(const PathTrie::Node* n, std::set<std::size_t>& out) {
    out.insert(n->tags.begin(), n->tags.end());
    for (const auto& [_, child] : n->children) collect_all(child.get(), out);
}

}  // namespace

std::set<std::size_t> PathTrie::containing(std::string_view path) const {
    auto comps = path_components(path);
    std::set<std::size_t> out;
    // frontier of nodes matching the first `depth` components
    std::vector<const Node*> frontier{root_.get()};
    for (std::size_t depth = 0;; ++depth) {
        for (const Node* n : frontier) out.insert(n->tags.begin(), n->tags.end());
        if (depth == comps.size() || frontier.empty()) break;
        std::vector<const Node*> next;
        for (const Node* n : frontier)
            for (const auto& [key, child] : n->children)
                if (component_matches(key, comps[depth])) next.push_back(child.get());
        frontier = std::move(next);
    }
    return out;
}

std::set<std::size_t> PathTrie::contained_by(std::string_view path) const {
    auto comps = path_components(path);
    std::vector<const Node*> frontier{root_.get()};
    for (const auto& comp : comps) {
        std::vector<const Node*> next;
        for (const Node* n : frontier)
            for (const auto& [key, child] : n->children)
                if (component_matches(comp, key)) next.push_back(child.get());
        frontier = std::move(next);
        if (frontier.empty()) break;
    }
    std::set<std::size_t> out;
    for (const Node* n : frontier) collect_all(n, out);
    return out;
}

std::set<std::size_t> PathTrie::overlapping(std::string_view path) const {
    auto out = containing(path);
    auto more = contained_by(path);
    out.insert(more.begin(), more.end());
    return out;
}

bool PathTrie::empty() const { return root_->children.empty() && root_->tags.empty(); }

}  // namespace dockorder

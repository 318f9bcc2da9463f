#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dockorder {

/// Split "/a/b/c/" into {"a","b","c"}; empty components and "." are dropped.
std::vector<std::string> path_components(std::string_view path);

/// One component against another; either side may carry fnmatch wildcards.
bool component_matches(std::string_view a, std::string_view b);

/// True when `parent` equals `child` or is one of its ancestors, component-wise
/// with wildcards. A child never contains its parent.
bool path_contains(std::string_view parent, std::string_view child);

inline bool paths_overlap(std::string_view a, std::string_view b) {
    return path_contains(a, b) || path_contains(b, a);
}

/// Prefix tree over path components. Each inserted pattern carries a tag
/// (usually an instruction index).
class PathTrie {
public:
    PathTrie();
    ~PathTrie();
    PathTrie(PathTrie&&) noexcept;
    PathTrie& operator=(PathTrie&&) noexcept;
    PathTrie(const PathTrie&) = delete;
    PathTrie& operator=(const PathTrie&) = delete;

    void insert(std::string_view pattern, std::size_t tag);

    /// Tags of inserted patterns that contain `path` (ancestors or equal).
    std::set<std::size_t> containing(std::string_view path) const;
    /// Tags of inserted patterns contained by `path` (descendants or equal).
    std::set<std::size_t> contained_by(std::string_view path) const;
    /// Union of the two queries above.
    std::set<std::size_t> overlapping(std::string_view path) const;

    bool contains(std::string_view parent, std::string_view child) const { return path_contains(parent, child); }
    bool empty() const;

    struct Node;

private:
    std::unique_ptr<Node> root_;
};

}  // namespace dockorder

#pragma once

#include "dockorder/build_cost.hpp"
#include "dockorder/graph.hpp"
#include "dockorder/history.hpp"
#include "dockorder/process.hpp"

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace support {

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::string& path() const { return path_; }
    std::string operator/(const std::string& rel) const { return path_ + "/" + rel; }

private:
    std::string path_;
};

void write_file(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);

/// A git work tree whose commits carry fixed author and committer dates.
class GitRepo {
public:
    explicit GitRepo(std::string dir);
    void write(const std::string& rel, const std::string& text) const;
    /// Stages everything and commits; returns the commit id.
    std::string commit(const std::string& message, const std::string& iso_date) const;
    std::string git(const std::vector<std::string>& args) const;
    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
};

std::int64_t unix_time(const std::string& iso_date);

/// Seven-instruction Python app with three commits: the initial import
/// (2026-01-01), an edit of the pip RUN line (2026-02-01) and an edit of
/// src/main.c (2026-03-01).
struct AppHistory {
    std::string initial, run_edit, source_edit;
};
extern const char* const kAppDockerfile;
AppHistory build_app_history(const GitRepo& repo);

/// Replays canned build logs and counts prune calls.
class ScriptedBuilder : public dockorder::BuilderAdapter {
public:
    std::deque<dockorder::BuildResult> builds;
    std::deque<std::uint64_t> disk_after_prune;  // empty = 0
    int prunes = 0;
    int build_calls = 0;

    dockorder::BuildResult build(const std::string&, const std::string&) override;
    void prune_all() override { ++prunes; }
    std::uint64_t disk_usage() override;
};

// --- synthetic instances ---------------------------------------------------

dockorder::DependencyGraph plain_graph(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Random DAG whose edges go from lower to higher index with probability `density`.
dockorder::DependencyGraph random_dag(std::mt19937_64& rng, std::size_t n, double density);

dockorder::FrequencyTable freq_of(const std::vector<double>& f);
dockorder::CostTable cost_of(const std::vector<double>& b);

std::vector<double> random_weights(std::mt19937_64& rng, std::size_t n, double lo, double hi);
/// Frequencies that sum to 1.
std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n);

// --- oracles -----------------------------------------------------------------

/// Direct double sum: sum_i f[order[i]] * sum_{k >= i} b[order[k]].
double oracle_cost(const std::vector<std::size_t>& order, const std::vector<double>& f, const std::vector<double>& b);

/// Positional check of every edge.
bool respects_edges(const std::vector<std::size_t>& order, const dockorder::DependencyGraph& g);

/// Minimum cost over every permutation that respects the edges.
double oracle_best(const dockorder::DependencyGraph& g, const std::vector<double>& f, const std::vector<double>& b);

struct EdgeKey {
    std::size_t from, to;
    std::string kind;
    bool operator<(const EdgeKey& o) const {
        return std::tie(from, to, kind) < std::tie(o.from, o.to, o.kind);
    }
    bool operator==(const EdgeKey& o) const { return from == o.from && to == o.to && kind == o.kind; }
};

/// "from to Kind" per line; '#' starts a comment.
std::vector<EdgeKey> read_edges_file(const std::string& path);
std::vector<EdgeKey> edge_keys(const dockorder::DependencyGraph& g);

std::string source_dir();  // tests/ in the source tree

}  // namespace support

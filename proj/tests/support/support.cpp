#include "support.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <limits>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace support {

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "dockorder-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_file(const std::string& path, const std::string& text) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GitRepo::GitRepo(std::string dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    git({"init", "-q", "."});
    git({"config", "user.email", "dev@example.com"});
    git({"config", "user.name", "dev"});
    git({"config", "commit.gpgsign", "false"});
}

void GitRepo::write(const std::string& rel, const std::string& text) const { write_file(dir_ + "/" + rel, text); }

std::string GitRepo::git(const std::vector<std::string>& args) const {
    std::vector<std::string> argv{"git"};
    argv.insert(argv.end(), args.begin(), args.end());
    auto o = dockorder::run_process(argv, dir_);
    if (o.exec_failed || o.result.exit_code != 0)
        throw std::runtime_error("git failed: " + o.exec_error + o.result.err);
    return o.result.out;
}

std::string GitRepo::commit(const std::string& message, const std::string& iso_date) const {
    setenv("GIT_AUTHOR_DATE", iso_date.c_str(), 1);
    setenv("GIT_COMMITTER_DATE", iso_date.c_str(), 1);
    git({"add", "-A"});
    git({"commit", "-q", "--allow-empty", "-m", message});
    unsetenv("GIT_AUTHOR_DATE");
    unsetenv("GIT_COMMITTER_DATE");
    auto id = git({"rev-parse", "HEAD"});
    while (!id.empty() && (id.back() == '\n' || id.back() == '\r')) id.pop_back();
    return id;
}

const char* const kAppDockerfile =
    "FROM python:3.11-slim\n"
    "ENV APP_HOME=/app\n"
    "WORKDIR /app\n"
    "COPY requirements.txt .\n"
    "RUN pip install --no-cache-dir -r requirements.txt\n"
    "COPY src/ /app/src/\n"
    "CMD [\"python\",\"src/main.py\"]\n";

AppHistory build_app_history(const GitRepo& repo) {
    AppHistory h;
    std::string first = kAppDockerfile;
    first.replace(first.find("pip install --no-cache-dir"), 26, "pip install");
    repo.write("Dockerfile", first);
    repo.write("requirements.txt", "flask\n");
    repo.write("src/main.c", "int main(){}\n");
    h.initial = repo.commit("import", "2026-01-01T00:00:00+0000");
    repo.write("Dockerfile", kAppDockerfile);
    h.run_edit = repo.commit("pip flags", "2026-02-01T00:00:00+0000");
    repo.write("src/main.c", "int main(){}\n// x\n");
    h.source_edit = repo.commit("source", "2026-03-01T00:00:00+0000");
    return h;
}

std::int64_t unix_time(const std::string& iso_date) {
    std::tm tm{};
    std::istringstream in(iso_date);
    in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
    if (in.fail()) throw std::runtime_error("bad date " + iso_date);
    return static_cast<std::int64_t>(timegm(&tm));
}

dockorder::BuildResult ScriptedBuilder::build(const std::string&, const std::string&) {
    ++build_calls;
    if (builds.empty()) throw std::runtime_error("no scripted build left");
    auto r = builds.front();
    builds.pop_front();
    return r;
}

std::uint64_t ScriptedBuilder::disk_usage() {
    if (disk_after_prune.empty()) return 0;
    auto v = disk_after_prune.front();
    disk_after_prune.pop_front();
    return v;
}

dockorder::DependencyGraph plain_graph(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    dockorder::DependencyGraph g;
    for (std::size_t i = 0; i < n; ++i) {
        dockorder::GraphNode node;
        node.index = i;
        node.instr.index = i;
        node.instr.kind = dockorder::InstructionKind::Run;
        node.instr.stage_index = 0;
        g.nodes.push_back(node);
    }
    for (auto [a, b] : edges) g.add_edge({a, b, dockorder::EdgeKind::FileDir, ""});
    return g;
}

dockorder::DependencyGraph random_dag(std::mt19937_64& rng, std::size_t n, double density) {
    std::bernoulli_distribution coin(density);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (coin(rng)) edges.emplace_back(a, b);
    return plain_graph(n, edges);
}

dockorder::FrequencyTable freq_of(const std::vector<double>& f) {
    dockorder::FrequencyTable t;
    t.raw = f;
    t.normalized = f;
    return t;
}

dockorder::CostTable cost_of(const std::vector<double>& b) {
    dockorder::CostTable t;
    t.seconds = b;
    t.source = dockorder::CostSource::Loaded;
    return t;
}

std::vector<double> random_weights(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n) {
    auto v = random_weights(rng, n, 0.0, 1.0);
    double s = std::accumulate(v.begin(), v.end(), 0.0);
    for (auto& x : v) x /= s;
    return v;
}

double oracle_cost(const std::vector<std::size_t>& order, const std::vector<double>& f, const std::vector<double>& b) {
    double total = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        double tail = 0;
        for (std::size_t k = i; k < order.size(); ++k) tail += b[order[k]];
        total += f[order[i]] * tail;
    }
    return total;
}

bool respects_edges(const std::vector<std::size_t>& order, const dockorder::DependencyGraph& g) {
    std::vector<std::size_t> pos(g.size(), g.size());
    for (std::size_t p = 0; p < order.size(); ++p) {
        if (order[p] >= g.size() || pos[order[p]] != g.size()) return false;
        pos[order[p]] = p;
    }
    if (order.size() != g.size()) return false;
    for (const auto& e : g.edges)
        if (pos[e.from_index] >= pos[e.to_index]) return false;
    return true;
}

double oracle_best(const dockorder::DependencyGraph& g, const std::vector<double>& f, const std::vector<double>& b) {
    std::vector<std::size_t> perm(g.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        if (respects_edges(perm, g)) best = std::min(best, oracle_cost(perm, f, b));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

std::vector<EdgeKey> read_edges_file(const std::string& path) {
    std::vector<EdgeKey> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        EdgeKey k{};
        if (ls >> k.from >> k.to >> k.kind) out.push_back(k);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<EdgeKey> edge_keys(const dockorder::DependencyGraph& g) {
    std::vector<EdgeKey> out;
    for (const auto& e : g.edges) out.push_back({e.from_index, e.to_index, std::string(dockorder::to_string(e.kind))});
    std::sort(out.begin(), out.end());
    return out;
}

std::string source_dir() { return DOCKORDER_TEST_SOURCE_DIR; }

}  // namespace support

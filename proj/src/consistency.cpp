#include "dockorder/consistency.hpp"

#include "dockorder/errors.hpp"
#include "dockorder/hash.hpp"
#include "dockorder/process.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace dockorder {

namespace {

std::string octal_mode(unsigned mode) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%04o", mode & 07777u);
    return buf;
}

std::string file_digest(std::string_view bytes, unsigned mode) {
    return "file:" + sha256_hex(bytes) + ":" + octal_mode(mode);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// "/a/b" with no trailing slash, "." and empty components removed.
std::string image_path(std::string_view raw) {
    std::string out;
    std::size_t i = 0;
    while (i < raw.size()) {
        std::size_t j = raw.find('/', i);
        if (j == std::string_view::npos) j = raw.size();
        auto part = raw.substr(i, j - i);
        if (part == "..") {
            auto cut = out.rfind('/');
            out.erase(cut == std::string::npos ? 0 : cut);
        } else if (!part.empty() && part != ".") {
            out += '/';
            out += part;
        }
        i = j + 1;
    }
    return out.empty() ? "/" : out;
}

std::map<std::string, std::string> env_from_list(const std::vector<std::string>& items) {
    std::map<std::string, std::string> out;
    for (const auto& kv : items) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) out[kv] = "";
        else out[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// fixture inspector

FixtureInspector::FixtureInspector(std::string dir) : dir_(std::move(dir)) {}

FsListing FixtureInspector::walk_fs() {
    fs::path root = fs::path(dir_) / "fs";
    FsListing out;
    if (!fs::exists(root)) return out;
    for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::none);
         it != fs::recursive_directory_iterator(); ++it) {
        const auto& entry = *it;
        std::string path = image_path(entry.path().lexically_relative(root).generic_string());
        auto st = entry.symlink_status();
        unsigned mode = static_cast<unsigned>(st.permissions()) & 07777u;
        if (fs::is_symlink(st)) {
            out.emplace_back(path, "link:" + fs::read_symlink(entry.path()).generic_string());
        } else if (fs::is_directory(st)) {
            out.emplace_back(path, "dir:" + octal_mode(mode));
        } else if (fs::is_regular_file(st)) {
            out.emplace_back(path, file_digest(slurp(entry.path()), mode));
        } else {
            out.emplace_back(path, "other:" + octal_mode(mode));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::map<std::string, std::string> FixtureInspector::env() {
    fs::path p = fs::path(dir_) / "env.json";
    if (!fs::exists(p)) return {};
    auto j = nlohmann::json::parse(slurp(p));
    if (j.is_array()) return env_from_list(j.get<std::vector<std::string>>());
    return j.get<std::map<std::string, std::string>>();
}

PackageSets FixtureInspector::installed_packages() {
    fs::path p = fs::path(dir_) / "packages.json";
    if (!fs::exists(p)) return {};
    return nlohmann::json::parse(slurp(p)).get<PackageSets>();
}

std::string FixtureInspector::workdir() {
    fs::path p = fs::path(dir_) / "workdir";
    if (!fs::exists(p)) return "/";
    return std::string(detail::trim(slurp(p)));
}

// ---------------------------------------------------------------------------
// tar

namespace {

std::uint64_t tar_number(std::string_view field) {
    if (!field.empty() && (static_cast<unsigned char>(field[0]) & 0x80)) {
        std::uint64_t v = static_cast<unsigned char>(field[0]) & 0x7f;
        for (std::size_t i = 1; i < field.size(); ++i) v = (v << 8) | static_cast<unsigned char>(field[i]);
        return v;
    }
    std::uint64_t v = 0;
    for (char c : field) {
        if (c == ' ' || c == '\0') {
            if (v) break;
            continue;
        }
        if (c < '0' || c > '7') throw ParseError("bad octal field in tar header");
        v = v * 8 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

std::string tar_string(std::string_view field) {
    auto nul = field.find('\0');
    return std::string(field.substr(0, nul));
}

std::map<std::string, std::string> pax_records(std::string_view body) {
    std::map<std::string, std::string> out;
    std::size_t i = 0;
    while (i < body.size()) {
        auto sp = body.find(' ', i);
        if (sp == std::string_view::npos) break;
        std::size_t len = std::stoul(std::string(body.substr(i, sp - i)));
        if (len == 0 || i + len > body.size()) break;
        auto rec = body.substr(sp + 1, i + len - sp - 2);  // drop trailing newline
        auto eq = rec.find('=');
        if (eq != std::string_view::npos) out[std::string(rec.substr(0, eq))] = std::string(rec.substr(eq + 1));
        i += len;
    }
    return out;
}

}  // namespace

FsListing read_tar_listing(std::string_view ar) {
    FsListing out;
    std::size_t off = 0;
    std::map<std::string, std::string> pax;
    std::optional<std::string> long_name, long_link;
    while (off + 512 <= ar.size()) {
        auto h = ar.substr(off, 512);
        if (std::all_of(h.begin(), h.end(), [](char c) { return c == '\0'; })) break;
        std::string name = tar_string(h.substr(0, 100));
        unsigned mode = static_cast<unsigned>(tar_number(h.substr(100, 8)));
        std::uint64_t size = tar_number(h.substr(124, 12));
        char type = h[156];
        std::string link = tar_string(h.substr(157, 100));
        if (h.substr(257, 5) == "ustar") {
            std::string prefix = tar_string(h.substr(345, 155));
            if (!prefix.empty()) name = prefix + "/" + name;
        }
        off += 512;
        if (off + size > ar.size()) throw ParseError("truncated tar archive");
        auto body = ar.substr(off, size);
        off += (size + 511) / 512 * 512;

        if (type == 'x') {
            pax = pax_records(body);
            continue;
        }
        if (type == 'g') continue;
        if (type == 'L') {
            long_name = tar_string(body);
            continue;
        }
        if (type == 'K') {
            long_link = tar_string(body);
            continue;
        }
        if (long_name) name = *long_name;
        if (long_link) link = *long_link;
        if (auto it = pax.find("path"); it != pax.end()) name = it->second;
        if (auto it = pax.find("linkpath"); it != pax.end()) link = it->second;
        pax.clear();
        long_name.reset();
        long_link.reset();

        std::string path = image_path(name);
        if (path == "/") continue;
        switch (type) {
            case '0':
            case '\0':
            case '7': out.emplace_back(path, file_digest(body, mode)); break;
            case '1': out.emplace_back(path, "hardlink:" + image_path(link)); break;
            case '2': out.emplace_back(path, "link:" + link); break;
            case '5': out.emplace_back(path, "dir:" + octal_mode(mode)); break;
            default: out.emplace_back(path, "other:" + octal_mode(mode)); break;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// docker inspector

const std::vector<std::string>& package_probe_order() {
    static const std::vector<std::string> order{"dpkg", "apk", "rpm", "pip", "npm"};
    return order;
}

DockerInspector::DockerInspector(std::string image, std::string binary)
    : image_(std::move(image)), binary_(binary.empty() ? env_or("DOCKORDER_DOCKER", "docker") : std::move(binary)) {}

namespace {

std::string docker_out(const std::string& bin, const std::string& which, const std::vector<std::string>& args) {
    std::vector<std::string> argv{bin};
    argv.insert(argv.end(), args.begin(), args.end());
    auto o = run_process(argv);
    if (o.exec_failed) throw RuntimeUnavailable(bin + ": " + o.exec_error);
    if (o.result.exit_code != 0) throw InspectorFailure(which, std::string(detail::trim(o.result.err)));
    return o.result.out;
}

}  // namespace

FsListing DockerInspector::walk_fs() {
    std::string id(detail::trim(docker_out(binary_, image_, {"create", image_})));
    FsListing listing;
    try {
        listing = read_tar_listing(docker_out(binary_, image_, {"export", id}));
    } catch (...) {
        run_process({binary_, "rm", "-f", id});
        throw;
    }
    run_process({binary_, "rm", "-f", id});
    return listing;
}

std::map<std::string, std::string> DockerInspector::env() {
    auto out = docker_out(binary_, image_, {"image", "inspect", "--format", "{{json .Config.Env}}", image_});
    auto j = nlohmann::json::parse(out);
    if (j.is_null()) return {};
    return env_from_list(j.get<std::vector<std::string>>());
}

PackageSets DockerInspector::installed_packages() {
    static const char* script =
        "command -v dpkg-query >/dev/null 2>&1 && { echo '##dpkg'; dpkg-query -W -f='${Package}=${Version}\\n'; }; "
        "command -v apk >/dev/null 2>&1 && { echo '##apk'; apk info -v 2>/dev/null; }; "
        "command -v rpm >/dev/null 2>&1 && { echo '##rpm'; rpm -qa; }; "
        "command -v pip >/dev/null 2>&1 && { echo '##pip'; pip list --format=freeze 2>/dev/null; }; "
        "command -v npm >/dev/null 2>&1 && { echo '##npm'; npm ls -g --depth=0 --parseable 2>/dev/null; }; "
        "true";
    auto out = docker_out(binary_, image_, {"run", "--rm", "--entrypoint", "sh", image_, "-c", script});
    PackageSets sets;
    std::string current;
    std::istringstream in(out);
    std::string line;
    while (std::getline(in, line)) {
        auto t = std::string(detail::trim(line));
        if (t.rfind("##", 0) == 0) {
            current = t.substr(2);
            sets[current];
        } else if (!t.empty() && !current.empty()) {
            sets[current].insert(t);
        }
    }
    return sets;
}

std::string DockerInspector::workdir() {
    auto out = docker_out(binary_, image_, {"image", "inspect", "--format", "{{json .Config.WorkingDir}}", image_});
    auto j = nlohmann::json::parse(out);
    return j.is_string() ? j.get<std::string>() : "/";
}

// ---------------------------------------------------------------------------
// comparison

std::set<std::string> default_excludes() { return {"HOSTNAME", "PWD"}; }

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Equivalent: return "equivalent";
        case Verdict::SimilarWithDiffs: return "similar_with_diffs";
        case Verdict::Divergent: return "divergent";
    }
    return "divergent";
}

std::string normalize_workdir(std::string_view path) { return image_path(detail::trim(path)); }

namespace {

template <typename F>
auto guarded(ImageInspector& inspector, const char* what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const InspectorFailure&) {
        throw;
    } catch (const RuntimeUnavailable&) {
        throw;
    } catch (const std::exception& e) {
        throw InspectorFailure(inspector.name(), std::string(what) + ": " + e.what());
    }
}

}  // namespace

ConsistencyReport compare_images(ImageInspector& a, ImageInspector& b,
                                 const std::set<std::string>& dynamic_env_excludes) {
    ConsistencyReport r;

    auto fa = guarded(a, "walk_fs", [&] { return a.walk_fs(); });
    auto fb = guarded(b, "walk_fs", [&] { return b.walk_fs(); });
    std::map<std::string, std::string> ma(fa.begin(), fa.end()), mb(fb.begin(), fb.end());
    std::set<std::string> paths;
    for (auto& [p, d] : ma) paths.insert(p);
    for (auto& [p, d] : mb) paths.insert(p);
    for (const auto& p : paths) {
        auto ia = ma.find(p), ib = mb.find(p);
        std::optional<std::string> da, db;
        if (ia != ma.end()) da = ia->second;
        if (ib != mb.end()) db = ib->second;
        if (da != db) r.fs_diffs.push_back({p, da, db});
    }
    r.fs_equal = r.fs_diffs.empty();

    auto ea = guarded(a, "env", [&] { return a.env(); });
    auto eb = guarded(b, "env", [&] { return b.env(); });
    for (const auto& x : dynamic_env_excludes) {
        ea.erase(x);
        eb.erase(x);
    }
    std::set<std::string> names;
    for (auto& [k, v] : ea) names.insert(k);
    for (auto& [k, v] : eb) names.insert(k);
    for (const auto& k : names) {
        std::optional<std::string> va, vb;
        if (auto it = ea.find(k); it != ea.end()) va = it->second;
        if (auto it = eb.find(k); it != eb.end()) vb = it->second;
        if (va != vb) r.env_diffs.push_back({k, va, vb});
    }
    r.env_equal = r.env_diffs.empty();

    auto pa = guarded(a, "installed_packages", [&] { return a.installed_packages(); });
    auto pb = guarded(b, "installed_packages", [&] { return b.installed_packages(); });
    std::vector<std::string> managers = package_probe_order();
    for (const auto* side : {&pa, &pb})
        for (const auto& [m, s] : *side)
            if (std::find(managers.begin(), managers.end(), m) == managers.end()) managers.push_back(m);
    for (const auto& m : managers) {
        auto ia = pa.find(m), ib = pb.find(m);
        if (ia == pa.end() && ib == pb.end()) continue;
        static const std::set<std::string> none;
        const auto& sa = ia == pa.end() ? none : ia->second;
        const auto& sb = ib == pb.end() ? none : ib->second;
        PackageDiff d{m, {}, {}};
        std::set_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(d.only_a));
        std::set_difference(sb.begin(), sb.end(), sa.begin(), sa.end(), std::back_inserter(d.only_b));
        bool presence_differs = (ia == pa.end()) != (ib == pb.end());
        if (!d.only_a.empty() || !d.only_b.empty() || presence_differs) r.pkg_diffs.push_back(std::move(d));
    }
    r.pkg_equal = r.pkg_diffs.empty();

    r.workdir_a = normalize_workdir(guarded(a, "workdir", [&] { return a.workdir(); }));
    r.workdir_b = normalize_workdir(guarded(b, "workdir", [&] { return b.workdir(); }));
    r.workdir_equal = r.workdir_a == r.workdir_b;

    if (r.fs_equal && r.env_equal && r.pkg_equal && r.workdir_equal) r.verdict = Verdict::Equivalent;
    else if (r.env_equal && r.workdir_equal) r.verdict = Verdict::SimilarWithDiffs;
    else r.verdict = Verdict::Divergent;
    return r;
}

std::string consistency_to_json(const ConsistencyReport& r) {
    auto opt = [](const std::optional<std::string>& s) { return s ? nlohmann::ordered_json(*s) : nullptr; };
    nlohmann::ordered_json j;
    j["verdict"] = std::string(to_string(r.verdict));
    j["fs_equal"] = r.fs_equal;
    j["env_equal"] = r.env_equal;
    j["pkg_equal"] = r.pkg_equal;
    j["workdir_equal"] = r.workdir_equal;
    nlohmann::ordered_json fsd = nlohmann::ordered_json::array();
    for (const auto& d : r.fs_diffs) fsd.push_back({{"path", d.path}, {"a", opt(d.a)}, {"b", opt(d.b)}});
    j["fs_diffs"] = fsd;
    nlohmann::ordered_json envd = nlohmann::ordered_json::array();
    for (const auto& d : r.env_diffs) envd.push_back({{"name", d.name}, {"a", opt(d.a)}, {"b", opt(d.b)}});
    j["env_diffs"] = envd;
    nlohmann::ordered_json pkgd = nlohmann::ordered_json::array();
    for (const auto& d : r.pkg_diffs)
        pkgd.push_back({{"manager", d.manager}, {"only_a", d.only_a}, {"only_b", d.only_b}});
    j["pkg_diffs"] = pkgd;
    j["workdir"] = {{"a", r.workdir_a}, {"b", r.workdir_b}};
    return j.dump(2) + "\n";
}

}  // namespace dockorder

#include "dockorder/errors.hpp"
#include "dockorder/registry.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace dockorder;

namespace {

const CommandKnowledgeRegistry& reg() { return CommandKnowledgeRegistry::builtin(); }

using S = std::set<std::string>;

}  // namespace

TEST_SUITE("registry") {

TEST_CASE("package managers") {
    auto apt = reg().apply({"apt-get", "install", "-y", "--no-install-recommends", "curl", "git=1:2.39"});
    CHECK(apt.known);
    CHECK(apt.installs == S{"curl", "git"});
    CHECK(apt.reads == S{"/var/lib/apt/lists"});

    auto update = reg().apply({"apt-get", "update"});
    CHECK(update.writes == S{"/var/lib/apt/lists"});
    CHECK(update.installs.empty());

    auto pip = reg().apply({"pip", "install", "-r", "requirements.txt", "flask==3.0", "Requests[security]"});
    CHECK(pip.installs == S{"flask", "requests"});
    CHECK(pip.reads == S{"requirements.txt"});
    CHECK(pip.uses == S{"pip"});

    auto module = reg().apply({"python", "-m", "pip", "install", "numpy"});
    CHECK(module.installs == S{"numpy"});
    CHECK(module.uses.count("python") == 1);
}

TEST_CASE("aliases and wrappers") {
    auto apt = reg().apply({"sudo", "apt", "install", "-y", "curl"});
    CHECK(apt.installs == S{"curl"});
    CHECK(apt.uses == S{"apt"});
    CHECK(reg().is_wrapper("sudo"));
    CHECK_FALSE(reg().is_wrapper("apt-get"));
    CHECK(reg().apply({"pip3", "install", "--no-cache-dir", "gunicorn"}).installs == S{"gunicorn"});
    CHECK(reg().apply({"/usr/bin/pip3", "install", "gunicorn"}).installs == S{"gunicorn"});
}

TEST_CASE("file utilities") {
    auto cp = reg().apply({"cp", "-r", "a", "b", "/dest"});
    CHECK(cp.reads == S{"a", "b"});
    CHECK(cp.writes == S{"/dest"});
    CHECK(reg().apply({"mkdir", "-p", "/app/data"}).writes == S{"/app/data"});
    CHECK(reg().apply({"curl", "-fsSL", "-o", "/tmp/x.tgz", "https://x"}).writes == S{"/tmp/x.tgz"});
    CHECK(reg().apply({"cd", "/app"}).new_dir == std::optional<std::string>("/app"));
    auto useradd = reg().apply({"useradd", "-m", "app"});
    CHECK(useradd.writes.count("/etc/passwd") == 1);
}

TEST_CASE("unknown programs read path-like arguments") {
    auto e = reg().apply({"mytool", "--flag", "./data/in.txt", "word"});
    CHECK_FALSE(e.known);
    CHECK(e.reads == S{"./data/in.txt"});
    CHECK(e.uses == S{"mytool"});
    CHECK_FALSE(reg().lookup("mytool").known);
    CHECK(reg().lookup("apt-get", "install").installs == std::vector<std::string>{"all"});
}

TEST_CASE("package names and tools") {
    CHECK(normalize_package("Flask==3.0") == "flask");
    CHECK(normalize_package("libssl1.1:amd64") == "libssl1.1");
    CHECK(normalize_package("requests[socks]>=2") == "requests");
    CHECK(normalize_package("lodash@4.17") == "lodash");
    auto tools = reg().tools_for("python3-pip");
    CHECK(tools.count("pip3") == 1);
    CHECK(tools.count("python3-pip") == 1);
    CHECK(reg().tools_for("jq") == S{"jq"});
    CHECK(program_basename("/usr/bin/python3") == "python3");
}

TEST_CASE("custom registries") {
    auto custom = CommandKnowledgeRegistry::from_json(R"({
        "programs": {"deploy": {"reads": ["first"], "writes": ["path:/srv/www"], "value_flags": ["--env"]}}
    })");
    auto e = custom.apply({"deploy", "--env", "prod", "site.tar"});
    CHECK(e.known);
    CHECK(e.reads == S{"site.tar"});
    CHECK(e.writes == S{"/srv/www"});
    CHECK_FALSE(custom.lookup("apt-get").known);
    CHECK_THROWS(CommandKnowledgeRegistry::from_json("{not json"));

    support::TempDir tmp;
    support::write_file(tmp / "reg.json", R"({"programs": {"x": {"installs": ["all"]}}})");
    CHECK(CommandKnowledgeRegistry::from_file(tmp / "reg.json").apply({"x", "pkg"}).installs == S{"pkg"});
    CHECK_THROWS(CommandKnowledgeRegistry::from_file(tmp / "missing.json"));
}

}

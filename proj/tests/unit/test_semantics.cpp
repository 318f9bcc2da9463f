#include "dockorder/dockerfile.hpp"
#include "dockorder/semantics.hpp"

#include <doctest.h>

#include <random>

using namespace dockorder;

namespace {

using S = std::set<std::string>;

std::vector<SemanticElements> elements_of(const std::string& text) { return extract_all(parse_dockerfile(text)); }

}  // namespace

TEST_SUITE("semantics") {

TEST_CASE("variable resolution forms") {
    std::map<std::string, std::string> vars{{"A", "x"}, {"EMPTY", ""}, {"REF", "$A/y"}};
    CHECK(resolve_variables("$A-${A}", vars).text == "x-x");
    CHECK(resolve_variables("${EMPTY:-def}", vars).text == "def");
    CHECK(resolve_variables("${A:-def}", vars).text == "x");
    CHECK(resolve_variables("${A:+alt}", vars).text == "alt");
    CHECK(resolve_variables("${EMPTY:+alt}", vars).text == "");
    CHECK(resolve_variables("${MISSING:-w}", vars).text == "w");
    CHECK(resolve_variables("\\$A", vars).text == "\\$A");
    CHECK(resolve_variables("$REF", vars).text == "x/y");

    auto r = resolve_variables("$A $MISSING ${B}", vars);
    CHECK(r.text == "x $MISSING ${B}");
    CHECK(r.used == S{"A"});
    CHECK(r.unresolved == S{"MISSING", "B"});
}

TEST_CASE("self reference terminates") {
    std::map<std::string, std::string> vars{{"L", "$L$L"}};
    auto r = resolve_variables("$L", vars);
    CHECK(r.used == S{"L"});
    CHECK(r.text.size() > 2);
}

TEST_CASE("path expansion") {
    CHECK(expand_path("bin", "/usr") == "/usr/bin");
    CHECK(expand_path("./a/../b/", "/w") == "/w/b/");
    CHECK(expand_path("/abs", "/w") == "/abs");
    CHECK(expand_path("../..", "/a") == "/");
    CHECK(expand_path("", "/w") == "/w");
    CHECK(normalize_context_path("./src/") == "src/");
    CHECK(normalize_context_path("/x") == "x");
    CHECK(normalize_context_path("./") == ".");
}

TEST_CASE("state folding") {
    auto doc = parse_dockerfile(
        "ARG BASE=alpine\n"
        "FROM $BASE\n"
        "ARG BASE\n"
        "ENV HOME_DIR=/srv\n"
        "WORKDIR $HOME_DIR\n"
        "WORKDIR app/\n"
        "USER nobody\n"
        "SHELL [\"/bin/bash\", \"-c\"]\n"
        "RUN true\n"
        "FROM scratch\n"
        "RUN true\n");
    auto st = fold_all(doc);
    REQUIRE(st.size() == 11);
    CHECK_FALSE(st[0].in_stage);
    CHECK(st[1].global_args.at("BASE") == "alpine");
    CHECK(st[1].variables.empty());
    CHECK(st[3].variables.at("BASE") == "alpine");
    CHECK(st[6].workdir == "/srv/app");
    CHECK(st[8].user == "nobody");
    CHECK(st[8].shell == std::vector<std::string>{"/bin/bash", "-c"});
    CHECK(st[10].stage_index == 1);
    CHECK(st[10].workdir == "/");
    CHECK(st[10].user == "root");
    CHECK(st[10].variables.empty());
    CHECK(st[10].global_args.at("BASE") == "alpine");
}

TEST_CASE("ARG without value expands to empty") {
    auto st = fold_all(parse_dockerfile("FROM a\nARG V\nRUN echo $V\n"));
    CHECK(st[2].variables.at("V") == "");
}

TEST_CASE("RUN elements") {
    auto e = elements_of(
        "FROM debian\n"
        "WORKDIR /app\n"
        "RUN apt-get update && apt-get install -y python3-pip > /tmp/log && pip3 install -r req.txt\n");
    const auto& run = e[2];
    CHECK(run.pkgs_installed == S{"python3-pip"});
    CHECK(run.tools_provided.count("pip3") == 1);
    CHECK(run.pkgs_used.count("apt-get") == 1);
    CHECK(run.pkgs_used.count("pip3") == 1);
    CHECK(run.paths_in.count("/app/req.txt") == 1);
    CHECK(run.paths_out.count("/var/lib/apt/lists") == 1);
    CHECK(run.paths_out.count("/tmp/log") == 1);
    CHECK(run.context_reads == S{"shell", "workdir"});
    CHECK_FALSE(run.misc.opaque);
}

TEST_CASE("cd changes later relative paths") {
    auto e = elements_of("FROM a\nWORKDIR /w\nRUN cd sub && mkdir out && cd && touch f\n");
    CHECK(e[2].paths_out == S{"/w/sub/out", "/root/f"});
}

TEST_CASE("nested shells and opaque bodies") {
    auto e = elements_of("FROM a\nRUN sh -c 'mkdir /x'\nRUN for i in 1 2; do echo $i; done\nRUN <<EOF\necho hi\nEOF\n");
    CHECK(e[1].paths_out == S{"/x"});
    CHECK(e[1].pkgs_used.count("sh") == 1);
    CHECK(e[2].misc.opaque);
    CHECK(e[3].misc.opaque);
}

TEST_CASE("exec form skips substitution") {
    auto e = elements_of("FROM a\nENV D=/data\nRUN [\"mkdir\", \"$D\"]\n");
    CHECK(e[2].vars_used.empty());
    CHECK(e[2].context_reads == S{"workdir"});
}

TEST_CASE("COPY and ADD") {
    auto e = elements_of(
        "FROM a AS build\n"
        "WORKDIR /src\n"
        "COPY ./go.mod go.sum ./\n"
        "COPY --chown=app:app cmd/ /src/cmd/\n"
        "ADD https://example.com/x.tgz /opt/x.tgz\n"
        "FROM b\n"
        "COPY --from=build /src/bin /usr/local/bin/app\n");
    CHECK(e[2].context_paths == S{"go.mod", "go.sum"});
    CHECK(e[2].paths_out == S{"/src/go.mod", "/src/go.sum"});
    CHECK(e[2].context_reads == S{"workdir"});
    CHECK(e[3].paths_in == S{"/etc/passwd"});
    CHECK(e[3].paths_out == S{"/src/cmd/"});
    CHECK(e[3].context_reads.empty());
    CHECK(e[4].context_paths == S{"remote:https://example.com/x.tgz"});
    CHECK(e[6].misc.copy_from == std::optional<std::string>("build"));
    CHECK(e[6].context_paths.empty());
    CHECK(e[6].paths_out == S{"/usr/local/bin/app"});
}

TEST_CASE("key-value and misc instructions") {
    auto e = elements_of(
        "ARG V=1\n"
        "FROM img:$V\n"
        "ENV A=$V B=2\n"
        "LABEL version=$A\n"
        "USER $A\n"
        "EXPOSE $B\n"
        "VOLUME data\n"
        "STOPSIGNAL SIGTERM\n"
        "HEALTHCHECK CMD curl localhost\n"
        "ONBUILD RUN make\n"
        "MAINTAINER someone\n");
    CHECK(e[0].misc.global_arg);
    CHECK(e[0].vars_defined == S{"V"});
    CHECK(e[1].misc.from_image == std::optional<std::string>("img:1"));
    CHECK(e[1].vars_used == S{"V"});
    CHECK(e[2].vars_defined == S{"A", "B"});
    CHECK(e[2].vars_unresolved == S{"V"});
    CHECK(e[2].context_writes == S{"env"});
    CHECK(e[3].vars_used == S{"A"});
    CHECK(e[4].user_written == std::optional<std::string>("$V"));
    CHECK(e[4].vars_used == S{"A"});
    CHECK(e[5].vars_used == S{"B"});
    CHECK(e[6].paths_out == S{"/data"});
    CHECK(e[7].misc.stopsignal);
    CHECK(e[8].misc.healthcheck);
    CHECK(e[8].paths_in.empty());
    CHECK(e[8].pkgs_used == S{"curl"});
    CHECK(e[9].misc.onbuild);
    CHECK(e[10].misc.deprecated);
}

TEST_CASE("extraction is deterministic") {
    std::mt19937 rng(7);
    const char* lines[] = {"ENV A=/a", "WORKDIR $A", "RUN mkdir -p b && cp x b/", "COPY . .", "USER app",
                           "RUN pip install flask", "ARG X=1", "LABEL k=$X"};
    for (int trial = 0; trial < 50; ++trial) {
        std::string text = "FROM base\n";
        for (int i = 0; i < 6; ++i) text += std::string(lines[rng() % 8]) + "\n";
        auto doc = parse_dockerfile(text);
        CHECK(extract_all(doc) == extract_all(doc));
    }
}

}

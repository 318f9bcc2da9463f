#include "dockorder/dockerfile.hpp"
#include "dockorder/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace dockorder;

namespace {

// Random but valid Dockerfile text with comments, blank lines and continuations.
std::string random_dockerfile(std::mt19937_64& rng, std::size_t n) {
    static const std::vector<std::string> bodies{
        "RUN apt-get update && apt-get install -y curl",
        "RUN pip install -r requirements.txt",
        "COPY . /app",
        "COPY --chown=app:app src/ /app/src/",
        "ADD https://example.com/x.tgz /tmp/",
        "ENV A=1 B=\"two words\"",
        "ENV LEGACY value with spaces",
        "ARG VERSION=1.0",
        "LABEL org.opencontainers.image.title=\"demo\"",
        "WORKDIR /app",
        "USER app",
        "EXPOSE 8080 8443",
        "VOLUME [\"/data\"]",
        "CMD [\"python\", \"main.py\"]",
        "ENTRYPOINT [\"/entry.sh\"]",
        "HEALTHCHECK --interval=30s CMD curl -f http://localhost/ || exit 1",
        "STOPSIGNAL SIGTERM",
        "SHELL [\"/bin/bash\", \"-c\"]",
        "ONBUILD RUN echo hi",
        "run echo lower case keyword",
    };
    std::string out = "FROM debian:12\n";
    for (std::size_t i = 0; i < n; ++i) {
        switch (rng() % 5) {
            case 0: out += "# comment " + std::to_string(i) + "\n"; break;
            case 1: out += "\n"; break;
            default: break;
        }
        auto body = bodies[rng() % bodies.size()];
        if (body.rfind("RUN ", 0) == 0 && rng() % 2) {
            body = "RUN set -e \\\n    && echo one \\\n    # inner comment\n    && echo two";
        }
        if (rng() % 4 == 0) body += "   ";
        out += body + "\n";
    }
    if (rng() % 2) out += "# trailing\n";
    return out;
}

}  // namespace

TEST_SUITE("dockerfile") {

TEST_CASE("instruction kinds and payloads") {
    auto doc = parse_dockerfile(
        "FROM python:3.11-slim AS base\n"
        "ENV APP_HOME=/app\n"
        "ENV LEGACY some value\n"
        "ARG TOKEN\n"
        "COPY --from=build --chown=1:1 a b /dest/\n"
        "COPY [\"with space\", \"/x\"]\n"
        "RUN pip install flask\n"
        "CMD [\"python\", \"main.py\"]\n"
        "EXPOSE 80 443\n"
        "HEALTHCHECK NONE\n"
        "HEALTHCHECK --interval=5s CMD curl -f localhost\n"
        "MAINTAINER someone\n");
    REQUIRE(doc.instructions.size() == 12);
    const auto& in = doc.instructions;
    CHECK(in[0].kind == InstructionKind::From);
    CHECK(from_image(in[0]) == "python:3.11-slim");
    CHECK(from_alias(in[0]) == std::optional<std::string>("base"));

    auto env = std::get<KeyValueList>(in[1].arguments);
    CHECK(env.pairs == std::vector<KeyValue>{{"APP_HOME", "/app"}});
    auto legacy = std::get<KeyValueList>(in[2].arguments);
    CHECK(legacy.legacy_form);
    CHECK(legacy.pairs == std::vector<KeyValue>{{"LEGACY", "some value"}});
    CHECK(std::get<KeyValueList>(in[3].arguments).pairs == std::vector<KeyValue>{{"TOKEN", std::nullopt}});

    CHECK(in[4].flag("from") == std::optional<std::string>("build"));
    CHECK(in[4].flag("chown") == std::optional<std::string>("1:1"));
    auto copy = std::get<PathArgs>(in[4].arguments);
    CHECK(copy.sources == std::vector<std::string>{"a", "b"});
    CHECK(copy.destination == "/dest/");
    auto json_copy = std::get<PathArgs>(in[5].arguments);
    CHECK(json_copy.json);
    CHECK(json_copy.sources == std::vector<std::string>{"with space"});

    CHECK(std::get<ShellText>(in[6].arguments).text == "pip install flask");
    CHECK(std::get<ExecArray>(in[7].arguments).items == std::vector<std::string>{"python", "main.py"});
    CHECK(std::get<ExecArray>(in[8].arguments).items == std::vector<std::string>{"80", "443"});
    CHECK_FALSE(in[9].healthcheck_cmd);
    CHECK(in[10].healthcheck_cmd);
    CHECK(in[10].flag("interval") == std::optional<std::string>("5s"));
    CHECK(in[11].deprecated());
}

TEST_CASE("keywords are case-insensitive and keep their spelling") {
    auto doc = parse_dockerfile("from alpine\nRun echo hi\n");
    CHECK(doc.instructions[1].kind == InstructionKind::Run);
    CHECK(doc.instructions[1].keyword == "Run");
    CHECK(kind_from_keyword("wOrKdIr") == InstructionKind::Workdir);
    CHECK_FALSE(kind_from_keyword("FETCH").has_value());
    CHECK(all_instruction_kinds().size() == kInstructionKindCount);
}

TEST_CASE("stages and indices") {
    auto doc = parse_dockerfile("ARG V=1\nFROM a:$V AS one\nRUN x\nFROM b\nCOPY --from=one /x /x\n");
    std::vector<std::size_t> stages, idx;
    for (const auto& i : doc.instructions) {
        stages.push_back(i.stage_index);
        idx.push_back(i.index);
    }
    CHECK(stages == std::vector<std::size_t>{0, 0, 0, 1, 1});
    CHECK(idx == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(doc.first_from() == 1);
}

TEST_CASE("continuations, comments and spans") {
    std::string text =
        "# syntax=docker/dockerfile:1\n"
        "FROM alpine\n"
        "\n"
        "# install tools\n"
        "RUN apk add \\\n"
        "    # a comment inside\n"
        "    curl \\\n"
        "    git\n"
        "# the end\n";
    auto doc = parse_dockerfile(text);
    REQUIRE(doc.directives.size() == 1);
    CHECK(doc.directives[0].name == "syntax");
    REQUIRE(doc.instructions.size() == 2);
    const auto& run = doc.instructions[1];
    CHECK(run.span.start_line == 5);
    CHECK(run.span.end_line == 8);
    CHECK(std::string(run.span.leading_text()) == "\n# install tools\n");
    CHECK(run.text == "RUN apk add     curl     git");
    CHECK(doc.trailing_comments == "# the end\n");
    CHECK(serialize(doc) == text);
}

TEST_CASE("escape directive") {
    auto doc = parse_dockerfile("# escape=`\nFROM mcr.microsoft.com/windows\nRUN dir `\n  c:\\\n");
    CHECK(doc.escape == '`');
    REQUIRE(doc.instructions.size() == 2);
    CHECK(doc.instructions[1].span.end_line == 4);
    CHECK_THROWS_AS(parse_dockerfile("# escape=x\nFROM a\n"), SyntaxError);
}

TEST_CASE("heredocs stay with their instruction") {
    std::string text = "FROM alpine\nRUN <<EOF\necho one\nFROM not-an-instruction\nEOF\nCMD [\"sh\"]\n";
    auto doc = parse_dockerfile(text);
    REQUIRE(doc.instructions.size() == 3);
    auto run = std::get<ShellText>(doc.instructions[1].arguments);
    CHECK(run.heredoc);
    CHECK(run.text.find("FROM not-an-instruction") != std::string::npos);
    CHECK(serialize(doc) == text);
    CHECK_THROWS_AS(parse_dockerfile("FROM a\nRUN <<EOF\necho\n"), SyntaxError);
}

TEST_CASE("syntax errors name the line") {
    try {
        parse_dockerfile("FROM alpine\n\nBOGUS thing\n");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.line() == 3);
        CHECK(e.error_class() == ErrorClass::user_input);
    }
    CHECK_THROWS_AS(parse_dockerfile("FROM\n"), SyntaxError);
    CHECK_THROWS_AS(parse_dockerfile("FROM a\nCOPY onlyone\n"), SyntaxError);
    CHECK_THROWS_AS(parse_dockerfile("FROM a\nENV novalue\n"), SyntaxError);
    CHECK_THROWS_AS(parse_dockerfile("FROM a\nSHELL /bin/bash\n"), SyntaxError);
    CHECK_THROWS_AS(parse_dockerfile("FROM a b\n"), SyntaxError);
    CHECK_THROWS_AS(parse_dockerfile("FROM a\nHEALTHCHECK curl\n"), SyntaxError);
}

TEST_CASE("empty and comment-only files") {
    CHECK(parse_dockerfile("").instructions.empty());
    auto doc = parse_dockerfile("# only\n\n");
    CHECK(doc.instructions.empty());
    CHECK(serialize(doc) == "# only\n\n");
}

TEST_CASE("missing final newline") {
    std::string text = "FROM a\nRUN b";
    auto doc = parse_dockerfile(text);
    CHECK(serialize(doc) == text);
    CHECK(serialize(doc, {1, 0}) == "RUN b\nFROM a\n");
}

TEST_CASE("reordering moves comments with their instruction") {
    auto doc = parse_dockerfile("FROM a\n# about copy\nCOPY x /x\n\n# about run\nRUN y\n");
    CHECK(serialize(doc, {0, 2, 1}) == "FROM a\n\n# about run\nRUN y\n# about copy\nCOPY x /x\n");
}

TEST_CASE("structural equality ignores spans") {
    auto a = parse_dockerfile("FROM a\nRUN   echo hi\n");
    auto b = parse_dockerfile("# c\nFROM a\n\nRUN   echo hi\n");
    CHECK(same_structure(a, b));
    auto c = parse_dockerfile("FROM a\nRUN echo bye\n");
    CHECK_FALSE(same_structure(a, c));
}

TEST_CASE("format_instruction renders parseable text") {
    auto doc = parse_dockerfile(
        "FROM a AS b\nENV X=\"1 2\"\nCOPY --chown=1 [\"a b\", \"/c\"]\nHEALTHCHECK --retries=3 CMD true\n");
    for (const auto& ins : doc.instructions) {
        auto again = parse_dockerfile(format_instruction(ins) + "\n");
        REQUIRE(again.instructions.size() == 1);
        auto copy = again.instructions[0];
        copy.index = ins.index;
        CHECK(same_structure(ins, copy));
    }
}

TEST_CASE("random documents round-trip") {
    std::mt19937_64 rng(17);
    for (int round = 0; round < 200; ++round) {
        auto text = random_dockerfile(rng, 1 + rng() % 25);
        auto doc = parse_dockerfile(text);
        CHECK(serialize(doc) == text);

        std::vector<std::size_t> order(doc.instructions.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin() + 1, order.end(), rng);
        auto again = parse_dockerfile(serialize(doc, order));
        REQUIRE(again.instructions.size() == order.size());
        for (std::size_t k = 0; k < order.size(); ++k) CHECK(again.instructions[k].text == doc.instructions[order[k]].text);
    }
}

}

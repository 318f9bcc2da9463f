#include "dockorder/errors.hpp"
#include "dockorder/shell.hpp"

#include <doctest.h>

#include <random>

using namespace dockorder;

namespace {

std::string random_word(std::mt19937_64& rng) {
    static const std::vector<std::string> atoms{
        "curl", "-y", "--no-cache", "/usr/local/bin", "'single quoted'", "\"double $HOME\"", "${VAR}", "$X",
        "a\\ b", "pkg==1.0", "x.tar.gz", "-O", "http://example.com/a?b=c", "@scope/pkg", "*.txt"};
    return atoms[rng() % atoms.size()];
}

std::vector<SimpleCommand> random_commands(std::mt19937_64& rng) {
    std::vector<SimpleCommand> cmds(1 + rng() % 5);
    static const std::vector<Connector> connectors{Connector::And, Connector::Or, Connector::Pipe,
                                                   Connector::Sequence};
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        auto& c = cmds[i];
        if (rng() % 4 == 0) c.assignments.push_back("DEBIAN_FRONTEND=noninteractive");
        c.program = std::vector<std::string>{"apt-get", "pip", "echo", "tar", "cp"}[rng() % 5];
        for (std::size_t k = 0; k < rng() % 5; ++k) {
            auto w = random_word(rng);
            c.words.push_back(w);
            (w[0] == '-' ? c.flags : c.positional_args).push_back(w);
        }
        if (rng() % 4 == 0) c.redirections.push_back({">", "/dev/null"});
        if (rng() % 5 == 0) c.redirections.push_back({"2>&", "1"});
        c.connector_to_next = i + 1 < cmds.size() ? connectors[rng() % connectors.size()] : Connector::None;
    }
    return cmds;
}

}  // namespace

TEST_SUITE("shell") {

TEST_CASE("control operators split simple commands") {
    auto cmds = parse_shell("apt-get update && apt-get install -y curl git || echo failed; ls | wc -l");
    REQUIRE(cmds.size() == 5);
    CHECK(cmds[0].program == "apt-get");
    CHECK(cmds[0].connector_to_next == Connector::And);
    CHECK(cmds[1].flags == std::vector<std::string>{"-y"});
    CHECK(cmds[1].positional_args == std::vector<std::string>{"install", "curl", "git"});
    CHECK(cmds[1].connector_to_next == Connector::Or);
    CHECK(cmds[2].connector_to_next == Connector::Sequence);
    CHECK(cmds[3].connector_to_next == Connector::Pipe);
    CHECK(cmds[4].connector_to_next == Connector::None);
}

TEST_CASE("quotes keep words together") {
    auto cmds = parse_shell("echo 'a && b' \"c; d\" e\\ f");
    REQUIRE(cmds.size() == 1);
    CHECK(cmds[0].words == std::vector<std::string>{"'a && b'", "\"c; d\"", "e\\ f"});
    CHECK(unquote("'a && b'") == "a && b");
    CHECK(unquote("\"c; d\"") == "c; d");
    CHECK(unquote("e\\ f") == "e f");
    CHECK(unquote("\"say \\\"hi\\\"\"") == "say \"hi\"");
}

TEST_CASE("assignments and redirections") {
    auto cmds = parse_shell("DEBIAN_FRONTEND=noninteractive apt-get install -y tzdata > /tmp/log 2>&1");
    REQUIRE(cmds.size() == 1);
    CHECK(cmds[0].assignments == std::vector<std::string>{"DEBIAN_FRONTEND=noninteractive"});
    CHECK(cmds[0].program == "apt-get");
    REQUIRE(cmds[0].redirections.size() == 2);
    CHECK(cmds[0].redirections[0] == Redirection{">", "/tmp/log"});

    auto only = parse_shell("A=1 B=2");
    REQUIRE(only.size() == 1);
    CHECK(only[0].program == "A=1");
    CHECK(only[0].words == std::vector<std::string>{"B=2"});
}

TEST_CASE("comments and line breaks") {
    auto cmds = parse_shell("echo one # trailing comment && not a command\n");
    REQUIRE(cmds.size() == 1);
    CHECK(cmds[0].words == std::vector<std::string>{"one"});
}

TEST_CASE("constructs outside the subset") {
    CHECK_THROWS_AS(parse_shell("(cd /x && make)"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse_shell("echo $(date)"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse_shell("echo `date`"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse_shell("if true; then echo; fi"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse_shell("for f in *; do echo $f; done"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse_shell("sleep 1 &"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse_shell("cat <<EOF"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse_shell("{ echo; }"), UnsupportedConstruct);
    try {
        parse_shell("echo $((1+2))");
        FAIL("expected UnsupportedConstruct");
    } catch (const UnsupportedConstruct& e) {
        CHECK(e.name() == "arithmetic expansion");
    }
}

TEST_CASE("malformed text") {
    CHECK_THROWS_AS(parse_shell("echo 'open"), ShellParseError);
    CHECK_THROWS_AS(parse_shell("echo \"open"), ShellParseError);
    CHECK_THROWS_AS(parse_shell("make &&"), ShellParseError);
    CHECK_THROWS_AS(parse_shell("&& make"), ShellParseError);
    CHECK_THROWS_AS(parse_shell("echo >"), ShellParseError);
    CHECK(parse_shell("").empty());
    CHECK(parse_shell("  ;  ").empty());
}

TEST_CASE("join and parse are inverse on random command lists") {
    std::mt19937_64 rng(23);
    for (int round = 0; round < 500; ++round) {
        auto cmds = random_commands(rng);
        auto text = join_commands(cmds);
        CHECK_MESSAGE(parse_shell(text) == cmds, text);
    }
}

}

#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include <lux/daap.hpp>

using namespace lux::daap;

namespace {

std::string slurp(const std::string& rel) {
    std::ifstream in(std::string(LUX_REPO_DIR) + "/" + rel);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Oracle: enumerate every loop level, no closed forms anywhere.
std::int64_t enumerate_domain(const Statement& st, ParamMap env, size_t level = 0) {
    if (level == st.vars.size()) return 1;
    std::int64_t lo = st.ranges[level].lower.eval(env);
    std::int64_t hi = st.ranges[level].upper.eval(env);
    std::int64_t total = 0;
    for (std::int64_t v = lo; v < hi; ++v) {
        env[st.vars[level].name] = v;
        total += enumerate_domain(st, env, level + 1);
    }
    return total;
}

}  // namespace

TEST_CASE("LU program parses with expected structure") {
    Program p = parse_program(slurp("programs/lu.daap"));
    REQUIRE(p.parameters == std::vector<std::string>{"N"});
    REQUIRE(p.statements.size() == 2);

    const Statement& s1 = p.statement("S1");
    CHECK(s1.depth() == 2);
    CHECK(s1.output.str() == "A[i,k]");
    REQUIRE(s1.inputs.size() == 2);
    CHECK(s1.inputs[1].str() == "A[k,k]");
    CHECK(s1.outdeg1_arrays == std::vector<std::string>{"A"});

    const Statement& s2 = p.statement("S2");
    CHECK(s2.depth() == 3);
    REQUIRE(s2.inputs.size() == 3);
    CHECK(s2.ranges[1].lower.str() == "k+1");
    CHECK(s2.ranges[2].upper.str() == "N");

    // Access dimensions: distinct variables per access.
    CHECK(Statement::access_dim(s1.inputs[0]) == 2);
    CHECK(Statement::access_dim(s1.inputs[1]) == 1);  // A[k,k]
    CHECK(Statement::access_dim(s2.inputs[2]) == 2);
}

TEST_CASE("LU iteration counts at N=4") {
    Program p = parse_program(slurp("programs/lu.daap"));
    ParamMap params{{"N", 4}};
    CHECK(iteration_count(p.statement("S1"), params) == 6);
    CHECK(iteration_count(p.statement("S2"), params) == 14);
}

TEST_CASE("iteration_count matches full enumeration") {
    for (const char* path : {"programs/lu.daap", "programs/mm_pair.daap",
                             "programs/onthefly_mm.daap", "programs/stencil_row.daap"}) {
        Program p = parse_program(slurp(path));
        for (std::int64_t n : {1, 2, 3, 5, 8, 13, 16}) {
            ParamMap params{{"N", n}};
            for (const auto& st : p.statements)
                CHECK(iteration_count(st, params) == enumerate_domain(st, params));
        }
    }
}

TEST_CASE("closed-form LU volumes") {
    Program p = parse_program(slurp("programs/lu.daap"));
    for (std::int64_t n : {2, 3, 7, 32, 100}) {
        ParamMap params{{"N", n}};
        CHECK(iteration_count(p.statement("S1"), params) == n * (n - 1) / 2);
        CHECK(iteration_count(p.statement("S2"), params) == n * (n - 1) * (2 * n - 1) / 6);
    }
}

TEST_CASE("empty ranges count zero") {
    Program p = parse_program("param N\nloop i in N..N { S: a[i] = f(b[i]) }\n");
    CHECK(iteration_count(p.statement("S"), {{"N", 5}}) == 0);
}

TEST_CASE("producer-consumer edges follow program order without self loops") {
    Program lu = parse_program(slurp("programs/lu.daap"));
    REQUIRE(lu.producer_consumer.size() == 1);
    CHECK(lu.producer_consumer[0].producer == 0);  // S1 -> S2 via A
    CHECK(lu.producer_consumer[0].consumer == 1);
    CHECK(lu.producer_consumer[0].array == "A");

    Program fly = parse_program(slurp("programs/onthefly_mm.daap"));
    REQUIRE(fly.producer_consumer.size() == 1);
    CHECK(fly.producer_consumer[0].array == "A");

    Program mm = parse_program(slurp("programs/mm_pair.daap"));
    CHECK(mm.producer_consumer.empty());
}

TEST_CASE("pure input arrays") {
    Program mm = parse_program(slurp("programs/mm_pair.daap"));
    CHECK(mm.pure_input_arrays() == std::set<std::string>{"A", "B", "D"});
    Program lu = parse_program(slurp("programs/lu.daap"));
    CHECK(lu.pure_input_arrays().empty());
}

TEST_CASE("disjoint access validation") {
    SECTION("shipped programs are clean") {
        for (const char* path : {"programs/lu.daap", "programs/mm_pair.daap",
                                 "programs/onthefly_mm.daap", "programs/stencil_row.daap",
                                 "programs/vector_add.daap"}) {
            Program p = parse_program(slurp(path));
            CHECK(validate_disjoint_access(p).empty());
        }
    }
    SECTION("row range starting at k aliases the pivot row read") {
        Program p = parse_program(slurp("programs/overlap_update.daap"));
        auto v = validate_disjoint_access(p);
        REQUIRE(v.size() == 1);
        CHECK(v[0].statement == "S2");
        CHECK(v[0].access_a == "A[i,j]");
        CHECK(v[0].access_b == "A[k,j]");
    }
    SECTION("identical input vectors always alias") {
        Program p = parse_program("param N\nloop i in 0..N { S: c[i] = f(a[i], a[i]) }\n");
        CHECK(validate_disjoint_access(p).size() == 1);
    }
}

TEST_CASE("parse print parse round trip") {
    for (const char* path : {"programs/lu.daap", "programs/mm_pair.daap",
                             "programs/onthefly_mm.daap", "programs/stencil_row.daap",
                             "programs/vector_add.daap", "programs/overlap_update.daap"}) {
        Program p = parse_program(slurp(path));
        Program q = parse_program(print_program(p));
        CHECK(p == q);
        CHECK(to_json(p) == to_json(q));
    }
}

TEST_CASE("parse errors carry positions") {
    SECTION("unexpected token") {
        try {
            parse_program("param N\nloop i in 0..N [\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 2);
            CHECK(std::string(e.what()).find("'{'") != std::string::npos);
        }
    }
    SECTION("undeclared index variable") {
        CHECK_THROWS_AS(parse_program("param N\nloop i in 0..N { S: a[j] = f(b[i]) }\n"),
                        ParseError);
    }
    SECTION("undeclared bound symbol") {
        CHECK_THROWS_AS(parse_program("loop i in 0..K { S: a[i] = f(b[i]) }\n"), ParseError);
    }
    SECTION("loop variable shadowing a parameter") {
        CHECK_THROWS_AS(parse_program("param N\nloop N in 0..N { }\n"), ParseError);
    }
    SECTION("statement outside any loop is rejected") {
        CHECK_THROWS_AS(parse_program("param N\nS: a[i] = f(b[i])\n"), ParseError);
    }
    SECTION("duplicate statement id") {
        CHECK_THROWS_AS(
            parse_program("param N\nloop i in 0..N { S: a[i] = f(b[i])\nS: c[i] = f(b[i]) }\n"),
            ParseError);
    }
}

TEST_CASE("dimensionality mismatch is rejected") {
    CHECK_THROWS_WITH(
        parse_program("param N\nloop i in 0..N { loop j in 0..N { S: a[i,j] = f(a[i]) } }\n"),
        Catch::Matchers::ContainsSubstring("dimensionality mismatch"));
}

TEST_CASE("generator statements may have no inputs") {
    Program p = parse_program("param N\nloop i in 0..N { G: a[i] = f() }\n");
    CHECK(p.statement("G").inputs.empty());
    CHECK(iteration_count(p.statement("G"), {{"N", 3}}) == 3);
}

TEST_CASE("annotation must name an input array") {
    CHECK_THROWS_WITH(
        parse_program("param N\nloop i in 0..N { S: c[i] = f(a[i]) @outdeg1(b) }\n"),
        Catch::Matchers::ContainsSubstring("outdeg1"));
}

TEST_CASE("canonical json shape") {
    Program p = parse_program(slurp("programs/lu.daap"));
    json j = to_json(p);
    REQUIRE(j["statements"].size() == 2);
    CHECK(j["statements"][0]["id"] == "S1");
    CHECK(j["statements"][0]["loops"][1]["lo"] == "k+1");
    CHECK(j["statements"][1]["inputs"].size() == 3);
    CHECK(j["edges"][0]["producer"] == "S1");
}

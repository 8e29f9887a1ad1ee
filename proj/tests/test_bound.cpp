#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include <lux/bound.hpp>

using namespace lux;
using Catch::Matchers::WithinRel;

namespace {

daap::Program load(const std::string& rel) {
    std::ifstream in(std::string(LUX_REPO_DIR) + "/" + rel);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return daap::parse_program(os.str());
}

const bound::StatementBound& stmt(const bound::BoundReport& rep, const std::string& id) {
    for (const auto& sb : rep.statements)
        if (sb.id == id) return sb;
    FAIL("no statement " + id);
    throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("LU bound: panel scale capped at 1, update at sqrt(M)/2") {
    daap::Program lu = load("programs/lu.daap");
    const std::int64_t N = 1024;
    const double M = 4096;
    const int P = 4096;
    bound::BoundReport rep = bound::program_bound(lu, {{"N", N}}, M, P);

    const auto& s1 = stmt(rep, "S1");
    CHECK(s1.rho == 1.0);
    CHECK(s1.outdeg1_u == 1);
    CHECK(s1.volume == N * (N - 1) / 2);
    CHECK(s1.psi_closed_form == "X-1");
    CHECK(s1.cap_dominated);

    const auto& s2 = stmt(rep, "S2");
    CHECK_THAT(s2.rho, WithinRel(std::sqrt(M) / 2.0, 1e-9));
    CHECK_FALSE(s2.rho_cap.has_value());
    CHECK(s2.volume == N * (N - 1) * (2 * N - 1) / 6);
    CHECK_THAT(s2.x0, WithinRel(3.0 * M, 1e-9));

    double expect_seq = double(s1.volume) + double(s2.volume) * 2.0 / std::sqrt(M);
    CHECK_THAT(rep.q_sequential, WithinRel(expect_seq, 1e-12));
    CHECK_THAT(rep.q_parallel, WithinRel(expect_seq / P, 1e-12));
    CHECK(rep.reuse.empty());  // A is produced, not a shared pure input
}

TEST_CASE("LU bound leading-order form") {
    daap::Program lu = load("programs/lu.daap");
    for (std::int64_t N : {1024, 2048, 4096}) {
        double M = 4096;
        int P = 64;
        bound::BoundReport rep = bound::program_bound(lu, {{"N", N}}, M, P);
        double leading = 2.0 * std::pow(double(N), 3) / (3.0 * P * std::sqrt(M)) +
                         double(N) * double(N - 1) / (2.0 * P);
        CHECK_THAT(rep.q_parallel, WithinRel(leading, 2e-3));
    }
}

TEST_CASE("shared-input pair of products: total collapses to N^3/M") {
    daap::Program mm = load("programs/mm_pair.daap");
    const std::int64_t N = 64;
    for (double M : {16.0, 64.0, 256.0}) {
        bound::BoundReport rep = bound::program_bound(mm, {{"N", N}}, M);
        double n3 = double(N) * N * N;

        for (const char* id : {"S", "T"}) {
            const auto& sb = stmt(rep, id);
            CHECK(sb.x0 == 2.0 * M);
            CHECK_THAT(sb.rho, WithinRel(M, 1e-9));
            CHECK_THAT(sb.q, WithinRel(n3 / M, 1e-9));
            CHECK_FALSE(sb.rho_cap.has_value());
        }
        REQUIRE(rep.reuse.size() == 1);
        CHECK(rep.reuse[0].array == "B");
        CHECK_THAT(rep.reuse[0].amount, WithinRel(n3 / M, 1e-9));
        CHECK_THAT(rep.q_sequential, WithinRel(n3 / M, 1e-9));
    }
}

TEST_CASE("generated operand drops its access term") {
    daap::Program fly = load("programs/onthefly_mm.daap");
    const std::int64_t N = 32;
    const double M = 16;
    bound::BoundReport rep = bound::program_bound(fly, {{"N", N}}, M);

    const auto& gen = stmt(rep, "S");
    CHECK(gen.unbounded_intensity);
    CHECK(gen.q == 0.0);

    const auto& t = stmt(rep, "T");
    CHECK(t.x0 == 2.0 * M);
    CHECK_THAT(t.rho, WithinRel(M, 1e-9));
    bool dropped = false;
    for (const auto& n : t.notes) dropped = dropped || n.find("dropped") != std::string::npos;
    CHECK(dropped);

    double n3 = double(N) * N * N;
    CHECK_THAT(rep.q_sequential, WithinRel(n3 / M, 1e-9));
    CHECK(rep.reuse.empty());
}

TEST_CASE("read-once full-dimension inputs cap intensity") {
    daap::Program va = load("programs/vector_add.daap");
    bound::BoundReport rep = bound::program_bound(va, {{"N", 1000}}, 8.0);
    const auto& s = stmt(rep, "S");
    CHECK(s.outdeg1_u == 2);
    CHECK(s.rho == 0.5);
    CHECK(s.q == 2000.0);

    daap::Program sr = load("programs/stencil_row.daap");
    bound::BoundReport rep2 = bound::program_bound(sr, {{"N", 100}}, 8.0);
    const auto& t = stmt(rep2, "S");
    CHECK(t.outdeg1_u == 1);  // A counts, the lower-dimension b does not
    CHECK(t.rho == 1.0);
    CHECK(t.q == 10000.0);
}

TEST_CASE("bound is monotone non-increasing in memory") {
    for (const char* path : {"programs/lu.daap", "programs/mm_pair.daap"}) {
        daap::Program p = load(path);
        double prev = std::numeric_limits<double>::infinity();
        for (double M : {16.0, 64.0, 256.0, 1024.0, 4096.0}) {
            bound::BoundReport rep = bound::program_bound(p, {{"N", 64}}, M);
            CHECK(rep.q_sequential <= prev * (1.0 + 1e-9));
            prev = rep.q_sequential;
        }
    }
}

TEST_CASE("reuse subtraction clamps at the largest single-statement bound") {
    daap::Program p = daap::parse_program(
        "param N\n"
        "loop i in 0..N { S: c[i] = f(b[i]) }\n"
        "loop i in 0..N { T: d[i] = f(b[i]) }\n");
    bound::BoundReport rep = bound::program_bound(p, {{"N", 1000}}, 4.0);
    double worst = std::max(stmt(rep, "S").q, stmt(rep, "T").q);
    CHECK(rep.q_sequential == worst);
    bool clamped = false;
    for (const auto& n : rep.notes) clamped = clamped || n.find("clamped") != std::string::npos;
    CHECK(clamped);
}

TEST_CASE("parallel bound divides by ranks") {
    daap::Program lu = load("programs/lu.daap");
    bound::BoundReport r1 = bound::program_bound(lu, {{"N", 128}}, 256.0, 1);
    bound::BoundReport r8 = bound::program_bound(lu, {{"N", 128}}, 256.0, 8);
    CHECK_THAT(r8.q_parallel, WithinRel(r1.q_sequential / 8.0, 1e-12));
}

TEST_CASE("report JSON carries the documented fields") {
    daap::Program lu = load("programs/lu.daap");
    bound::BoundReport rep = bound::program_bound(lu, {{"N", 64}}, 256.0, 4);
    auto j = bound::to_json(rep);
    CHECK(j["totals"].contains("q_sequential"));
    CHECK(j["totals"].contains("q_parallel"));
    CHECK(j["totals"]["volume"] ==
          64 * 63 / 2 + 64 * 63 * 127 / 6);
    bool saw_s1 = false;
    for (const auto& s : j["statements"]) {
        if (s["id"] == "S1") {
            saw_s1 = true;
            CHECK(s["rho"] == 1.0);
            CHECK(s["rho_cap"] == 1.0);
            CHECK(s["psi_closed_form"] == "X-1");
        }
    }
    CHECK(saw_s1);
}

TEST_CASE("errors: unbound parameter and bad rank count") {
    daap::Program lu = load("programs/lu.daap");
    CHECK_THROWS_WITH(bound::program_bound(lu, {}, 64.0),
                      Catch::Matchers::ContainsSubstring("unbound"));
    CHECK_THROWS_AS(bound::program_bound(lu, {{"N", 8}}, 64.0, 0), std::runtime_error);
}

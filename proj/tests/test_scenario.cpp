#include "doctest.h"

#include "reflectlab/errors.hpp"
#include "reflectlab/run.hpp"
#include "reflectlab/scenario.hpp"
#include "reflectlab/separation.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace reflectlab;

namespace {

const char* clamping_text = R"([model]
kind = uniform-binary
depth = 1

[barriers]
lower = const 0
upper = table 1/4 1 1

[generator]
xi = table 0 1
f = zero
mu = 0
)";

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("reflectlab_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Outcome {
    int code;
    std::string summary;
    std::string errors;
};

Outcome run_text(const std::string& text, RunOptions options) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_scenario_text(text, options, out, err);
    return {code, out.str(), err.str()};
}

int parse_error_column(const std::string& text, std::size_t& line) {
    try {
        parse_scenario(text);
    } catch (const ParseError& e) {
        line = e.line();
        return static_cast<int>(e.column());
    }
    return -1;
}

}  // namespace

TEST_CASE("serialization round-trips byte-identically") {
    const std::string once = serialize_scenario(parse_scenario(clamping_text));
    CHECK(serialize_scenario(parse_scenario(once)) == once);
    CHECK(once.find("upper = table 1/4 1 1") != std::string::npos);

    const char* others[] = {
        "[model]\nkind = example33\ncells = 4\n[generator]\nxi = midpoint\n[run]\nmode = separation\n",
        "[model]\nkind = uniform\ndepth = 2\nfactor = 3\ntimes = 0 1/2 1\n[generator]\nf = monotone-cubic 1 0 -1\n"
        "mu = 0\nv = const 1/8\n[run]\nnumeric = float\ntol = 1e-8\nns = 1 3 9\nms = 2 4\neps = 0.5\nnode = 1:2\n",
        "[model]\nkind = lattice\nlattice.0.0 = 0:1/2 1:1/2\nlattice.1.0 = 0:1/2 1:1/2\nlattice.1.1 = 1:1/2 2:1/2\n"
        "[barriers]\nlower = const -1\nupper = none\n[generator]\nxi = const 0.125\n"
        "f = penalty-composite 0 0 4 4\n",
    };
    for (const char* text : others) {
        const std::string s1 = serialize_scenario(parse_scenario(text));
        CHECK(serialize_scenario(parse_scenario(s1)) == s1);
    }

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::string s1 = serialize_scenario(generate_random_scenario(seed, 1 + seed % 4));
        CHECK(serialize_scenario(parse_scenario(s1)) == s1);
    }
}

TEST_CASE("parse errors carry line and column") {
    std::size_t line = 0;
    CHECK(parse_error_column("[model]\nkind = tree\n", line) == 8);
    CHECK(line == 2);
    CHECK(parse_error_column("[model]\n\n  depth 3\n", line) == 3);
    CHECK(line == 3);
    CHECK(parse_error_column("[modle]\n", line) == 2);
    CHECK(parse_error_column("kind = explicit\n", line) == 1);
    CHECK(parse_error_column("[generator]\nxi = table 1 x/2 3\n", line) == 14);
    CHECK(parse_error_column("[generator]\nf = affine 1\n", line) == 13);
    CHECK(parse_error_column("[run]\nmode = solve\nmode = game\n", line) == 1);
    CHECK(line == 3);
    CHECK(parse_error_column("[run]\nnode = 3\n", line) == 8);
    CHECK(parse_error_column("[model]\nrows.0.0 = 1\n", line) == 1);
    CHECK(parse_error_column("[run]\neps = 1/10 0\n", line) == 12);
    CHECK(parse_error_column("[model]\nkind = uniform-binary # comment\n", line) == -1);
}

TEST_CASE("built problems") {
    const auto p = build_problem<Rational>(parse_scenario(clamping_text));
    CHECK(p.model.node_count() == 3);
    CHECK((*p.barriers.upper)[0] == Rational(1, 4));
    CHECK(p.gen.xi == std::vector<Rational>{0, 1});

    const auto lattice = build_model(
        parse_scenario("[model]\nkind = lattice\nlattice.0.0 = 0:1/2 1:1/2\nlattice.1.0 = 0:1/2 1:1/2\n"
                       "lattice.1.1 = 1:1/2 2:1/2\n")
            .model);
    CHECK(lattice.leaf_count() == 4);

    const auto e33 = build_problem<Rational>(parse_scenario("[model]\nkind = example33\ncells = 3\n[generator]\nxi = midpoint\n"));
    CHECK(e33.model == example33_barriers<Rational>(3).model);

    CHECK_THROWS_AS(build_problem<Rational>(parse_scenario("[model]\nkind = uniform-binary\ndepth = 2\n"
                                                           "[barriers]\nlower = table 0 0\n")),
                    ModelError);
    CHECK_THROWS_WITH_AS(build_model(parse_scenario("[model]\nkind = explicit\nrow.0.0 = 1/2 1/3\n").model),
                         doctest::Contains("0:0"), ModelError);
}

TEST_CASE("random scenarios are deterministic, separated and solvable") {
    CHECK(serialize_scenario(generate_random_scenario(1, 3)) == serialize_scenario(generate_random_scenario(1, 3)));
    CHECK(serialize_scenario(generate_random_scenario(1, 3)) != serialize_scenario(generate_random_scenario(2, 3)));
    CHECK_THROWS_AS(generate_random_scenario(1, 0), DomainError);
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        const auto p = build_problem<Rational>(generate_random_scenario(seed, 1 + seed % 4));
        const auto& L = *p.barriers.lower;
        const auto& U = *p.barriers.upper;
        CHECK(check_separation(p.model, L, U).kind == SeparationKind::strict);
        for (NodeId v = 0; v < p.model.node_count(); ++v) {
            CHECK(U[v] - L[v] >= Rational(1, 16));
            CHECK(abs_value<Rational>(L[v]) <= Rational(1, 4));
        }
        for (std::size_t k = 0; k < p.model.leaf_count(); ++k) {
            CHECK(p.gen.xi[k] >= L[p.model.leaf(k)]);
            CHECK(p.gen.xi[k] <= U[p.model.leaf(k)]);
        }
        CHECK(validate_generator(p.model, p.gen, default_probes<Rational>()).ok());
        const auto sol = solve_reflected(p.model, p.gen, p.barriers);
        CHECK(verify_solution(p.model, p.gen, p.barriers, sol, Rational(0)).passed());
    }
}

TEST_CASE("run modes and exit codes") {
    RunOptions options;
    options.out_dir = scratch("solve");
    auto r = run_text(clamping_text, options);
    CHECK(r.code == exit_ok);
    CHECK(r.summary.find("Y0: 1/4\n") != std::string::npos);
    CHECK(std::filesystem::exists(options.out_dir / "solution_nodes.csv"));
    CHECK(slurp(options.out_dir / "solution_nodes.csv").rfind("level,index,y,lower,upper\n", 0) == 0);

    for (RunMode mode : {RunMode::penalize, RunMode::separation, RunMode::game}) {
        options.mode = mode;
        options.out_dir = scratch(to_string(mode));
        r = run_text(clamping_text, options);
        CHECK_MESSAGE(r.code == exit_ok, to_string(mode), r.errors);
    }

    options.mode = RunMode::game;
    options.exact = false;
    options.tol = 1e-12;
    r = run_text(clamping_text, options);
    CHECK(r.code == exit_ok);
    CHECK(r.summary.find("numeric: float") != std::string::npos);

    const std::string depth5 =
        "[model]\nkind = uniform-binary\ndepth = 5\n[barriers]\nlower = const -1\nupper = const 1\n";
    r = run_text(depth5, RunOptions{RunMode::game, {}, {}, {}, {}, scratch("d5")});
    CHECK(r.code == exit_input_error);
    CHECK(r.errors.find("458330^2") != std::string::npos);
    CHECK(r.errors.find("210066388900") != std::string::npos);
    CHECK(r.summary.empty());

    r = run_text("[model]\nkind = explicit\nrow.0.0 = 1/2 1/4\n", RunOptions{{}, {}, {}, {}, {}, scratch("bad")});
    CHECK(r.code == exit_input_error);
    CHECK(r.errors.find("node 0:0") != std::string::npos);

    r = run_text("[model]\nkind = tree\n", RunOptions{{}, {}, {}, {}, {}, scratch("parse")});
    CHECK(r.code == exit_input_error);
    CHECK(r.errors.find("line 2, column 8") != std::string::npos);

    // L > U at the root: the solver precondition is an input error, separation a failed check.
    const std::string crossed =
        "[model]\nkind = uniform-binary\ndepth = 1\n[barriers]\nlower = table 1 0 0\nupper = const 1/2\n";
    CHECK(run_text(crossed, RunOptions{RunMode::solve, {}, {}, {}, {}, scratch("x1")}).code == exit_input_error);
    CHECK(run_text(crossed, RunOptions{RunMode::separation, {}, {}, {}, {}, scratch("x2")}).code ==
          exit_verification_failure);

    // mu * dt = 3/2: the implicit step is not well posed.
    Scenario sc = parse_scenario(clamping_text);
    sc.generator.f.kind = DriverSpec::Kind::affine;
    sc.generator.f.b = Rational(3, 2);
    sc.generator.mu = Rational(3, 2);
    std::ostringstream out;
    std::ostringstream err;
    CHECK(run_scenario(sc, RunOptions{{}, {}, {}, {}, {}, scratch("step")}, out, err) == exit_input_error);
}

TEST_CASE("verification failures exit with 1") {
    // A push of 3 at the root keeps the diagonal gap above 1e-6 up to the cap.
    const std::string wide =
        "[model]\nkind = uniform-binary\ndepth = 1\n[barriers]\nlower = table 3 -4 -4\nupper = table 4 4 4\n"
        "[generator]\nxi = table -4 4\n[run]\nmode = penalize\nns = 1 2\nms = 1 2\n";
    const auto r = run_text(wide, RunOptions{{}, {}, {}, {}, {}, scratch("wide")});
    CHECK(r.code == exit_verification_failure);
    CHECK(r.summary.find("diagonal_converged: no") != std::string::npos);
}

TEST_CASE("artifacts are byte-identical across runs") {
    for (RunMode mode : {RunMode::solve, RunMode::game, RunMode::batch}) {
        const auto a = scratch("det_a");
        const auto b = scratch("det_b");
        RunOptions options;
        options.mode = mode;
        options.seed = 3;
        options.out_dir = a;
        CHECK(run_text(clamping_text, options).code == exit_ok);
        options.out_dir = b;
        CHECK(run_text(clamping_text, options).code == exit_ok);
        for (const auto& entry : std::filesystem::directory_iterator(a))
            CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    }
}

TEST_CASE("batch mode runs every suite") {
    Scenario sc;
    sc.run.mode = RunMode::batch;
    sc.run.batch = 12;
    sc.run.depth = 2;
    std::ostringstream out;
    std::ostringstream err;
    const auto dir = scratch("batch");
    CHECK(run_scenario(sc, RunOptions{{}, {}, {}, {}, {}, dir}, out, err) == exit_ok);
    CHECK(out.str().find("batch_failures: 0") != std::string::npos);
    const std::string csv = slurp(dir / "batch.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
    CHECK(csv.find("FAIL") == std::string::npos);
    CHECK(csv.find("skipped") == std::string::npos);
}

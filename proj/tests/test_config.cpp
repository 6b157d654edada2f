#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>

#include "nfield/config.hpp"

using namespace nfield;

namespace {

const char* kMinimal =
    "[domain]\n"
    "nodes = 5\n"
    "[population.1]\n"
    "activation = logistic 1 4 0\n"
    "[population.2]\n"
    "activation = relu\n";

std::size_t thrown_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.line;
    }
    FAIL("expected ConfigError");
    return 0;
}

}  // namespace

TEST_CASE("a minimal config materializes every default") {
    auto c = parse_config(kMinimal);
    CHECK(c.domain.dimension == 1);
    CHECK(c.domain.lower[0] == 0.0);
    CHECK(c.domain.upper[0] == 1.0);
    CHECK(c.domain.nodes[0] == 5);
    CHECK(c.domain.rule == QuadratureRule::trapezoid);
    CHECK(c.pop1.tau == FieldExpr::constant_expr(1.0));
    CHECK(c.pop1.I_star == FieldExpr::constant_expr(0.0));
    CHECK(c.pop1.activation == Activation::logistic(1.0, 4.0, 0.0));
    CHECK(c.pop2.activation == Activation::relu());
    CHECK(c.k11.family == KernelSpec::Family::zero);
    CHECK(c.k22.family == KernelSpec::Family::zero);
    CHECK(c.delay1.family == DelaySpec::Family::zero);
    CHECK(c.control.mode == ControlMode::open_loop);
    CHECK(c.control.alpha == FieldExpr::constant_expr(1.0));
    CHECK(c.control.z_ref == FieldExpr::constant_expr(0.0));
    CHECK(c.solver.max_iterations == 10000);
    CHECK(c.solver.tol_res == 1e-10);
    CHECK(c.solver.inner_tol == 1e-12);  // tol_res / 100, materialized at parse
    CHECK(c.solver.seed == 12345);
    CHECK(c.solver.contraction_samples == 16);
    CHECK(c.simulation.dt == 1e-3);
    CHECK(c.simulation.t_end == 10.0);
    CHECK(c.simulation.method == Integrator::euler);
    CHECK(c.simulation.stride == 100);
    CHECK(c.simulation.blowup_threshold == 1e12);
}

TEST_CASE("a full config lands every key in its slot") {
    auto c = parse_config(
        "[domain]\n"
        "dim = 1\n"
        "extent = -0.5 1.5\n"
        "nodes = 33\n"
        "rule = midpoint\n"
        "[population.1]\n"
        "tau = affine 0.8 0.4\n"
        "I_star = gaussian 0.2 0.5 0.15\n"
        "activation = logistic 1 4 0\n"
        "[population.2]\n"
        "tau = 1.2\n"  // bare numbers read as constants
        "I_star = constant 0.05\n"
        "activation = satlin 2 -1 3\n"
        "[kernel.11]\n"
        "family = gaussian 0.8 0.3\n"
        "[kernel.12]\n"
        "family = mexican_hat 1 0.3 0.5 0.6\n"
        "[kernel.21]\n"
        "family = constant 0.25\n"
        "[kernel.22]\n"
        "family = zero\n"
        "[delay.1]\n"
        "family = distance_proportional 1.5 2\n"
        "[delay.2]\n"
        "family = constant 0.05\n"
        "[control]\n"
        "mode = prop_int\n"
        "k = 1.5\n"
        "k_P = 0.5\n"
        "k_I = 2\n"
        "alpha = affine 1 0.1\n"
        "z_ref = gaussian 0.4 0.5 0.3\n"
        "[solver]\n"
        "max_iterations = 500\n"
        "tol_res = 1e-9\n"
        "damping = 0.7\n"
        "anderson_depth = 3\n"
        "inner_tol = 1e-13\n"
        "multistart = 2\n"
        "seed = 42\n"
        "contraction_samples = 8\n"
        "[simulation]\n"
        "dt = 0.002\n"
        "t_end = 5\n"
        "method = heun\n"
        "stride = 50\n"
        "prehistory_z1 = constant 0.5\n"
        "prehistory_z2 = affine 0.1 0.2\n"
        "blowup_threshold = 1e9\n");

    CHECK(c.domain.lower[0] == -0.5);
    CHECK(c.domain.upper[0] == 1.5);
    CHECK(c.domain.nodes[0] == 33);
    CHECK(c.domain.rule == QuadratureRule::midpoint);
    CHECK(c.pop1.tau.kind == FieldExpr::Kind::affine);
    CHECK(c.pop1.tau.offset == 0.8);
    CHECK(c.pop1.tau.grad[0] == 0.4);
    CHECK(c.pop1.I_star.kind == FieldExpr::Kind::gaussian);
    CHECK(c.pop1.I_star.amplitude == 0.2);
    CHECK(c.pop1.I_star.center[0] == 0.5);
    CHECK(c.pop1.I_star.width == 0.15);
    CHECK(c.pop2.tau == FieldExpr::constant_expr(1.2));
    CHECK(c.pop2.activation == Activation::saturating_linear(2.0, -1.0, 3.0));
    CHECK(c.k11.family == KernelSpec::Family::gaussian);
    CHECK(c.k11.p[0] == 0.8);
    CHECK(c.k11.p[1] == 0.3);
    CHECK(c.k12.family == KernelSpec::Family::mexican_hat);
    CHECK(c.k12.p[3] == 0.6);
    CHECK(c.k21.family == KernelSpec::Family::constant);
    CHECK(c.k21.p[0] == 0.25);
    CHECK(c.delay1.family == DelaySpec::Family::distance_proportional);
    CHECK(c.delay1.p[0] == 1.5);
    CHECK(c.delay1.p[1] == 2.0);
    CHECK(c.delay2.family == DelaySpec::Family::constant);
    CHECK(c.delay2.p[0] == 0.05);
    CHECK(c.control.mode == ControlMode::prop_int);
    CHECK(c.control.k == 1.5);
    CHECK(c.control.k_P == 0.5);
    CHECK(c.control.k_I == 2.0);
    CHECK(c.control.alpha.kind == FieldExpr::Kind::affine);
    CHECK(c.control.z_ref.kind == FieldExpr::Kind::gaussian);
    CHECK(c.solver.max_iterations == 500);
    CHECK(c.solver.tol_res == 1e-9);
    CHECK(c.solver.damping == 0.7);
    CHECK(c.solver.anderson_depth == 3);
    CHECK(c.solver.inner_tol == 1e-13);
    CHECK(c.solver.multistart == 2);
    CHECK(c.solver.seed == 42);
    CHECK(c.solver.contraction_samples == 8);
    CHECK(c.simulation.dt == 0.002);
    CHECK(c.simulation.t_end == 5.0);
    CHECK(c.simulation.method == Integrator::heun);
    CHECK(c.simulation.stride == 50);
    CHECK(c.simulation.prehistory_z2.kind == FieldExpr::Kind::affine);
    CHECK(c.simulation.blowup_threshold == 1e9);
}

TEST_CASE("comments, blank lines, and whitespace are tolerated") {
    auto c = parse_config(
        "# leading comment\n"
        "\n"
        "[domain]  # trailing comment\n"
        "  nodes   =   7  # another\n"
        "[population.1]\n"
        "activation = logistic 1 4 0\n"
        "[population.2]\n"
        "activation = relu\n");
    CHECK(c.domain.nodes[0] == 7);
}

TEST_CASE("unknown keys and sections are rejected with their line") {
    CHECK(thrown_line("[domain]\n"
                      "nodes = 5\n"
                      "typo_key = 3\n") == 3);
    CHECK(thrown_line("[домейн]\n") == 1);
    CHECK(thrown_line("[domain]\n"
                      "nodes = 5\n"
                      "[solver]\n"
                      "damping 0.5\n") == 4);
    CHECK(thrown_line("nodes = 5\n") == 1);
    CHECK(thrown_line("[domain]\n"
                      "nodes =\n") == 2);
    CHECK(thrown_line("[domain\n") == 1);
    // Unknown keys inside otherwise valid sections name themselves.
    try {
        parse_config("[control]\ngain = 2\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("gain") != std::string::npos);
        CHECK(std::string(e.what()).find("control") != std::string::npos);
    }
}

TEST_CASE("required keys are enforced") {
    CHECK_THROWS_AS(parse_config("[domain]\n"
                                 "extent = 0 1\n"
                                 "[population.1]\n"
                                 "activation = relu\n"
                                 "[population.2]\n"
                                 "activation = relu\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("[domain]\n"
                                 "nodes = 5\n"
                                 "[population.2]\n"
                                 "activation = relu\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("[domain]\n"
                                 "nodes = 5\n"
                                 "[population.1]\n"
                                 "activation = relu\n"),
                    ConfigError);
}

TEST_CASE("malformed values are rejected") {
    const char* cases[] = {
        // extent arity and ordering
        "[domain]\nnodes = 5\nextent = 0 1 2\n",
        "[domain]\nnodes = 5\nextent = 1 0\n",
        // node counts
        "[domain]\nnodes = 1\n",
        "[domain]\nnodes = 5 5\n",
        "[domain]\ndim = 3\nnodes = 5 5 5\n",
        // field expression arity
        "[domain]\nnodes = 5\n[population.1]\ntau = affine 1 2 3\nactivation = relu\n"
        "[population.2]\nactivation = relu\n",
        "[domain]\nnodes = 5\n[population.1]\ntau = gaussian 1 0.5\nactivation = relu\n"
        "[population.2]\nactivation = relu\n",
        "[domain]\nnodes = 5\n[population.1]\ntau = banana\nactivation = relu\n"
        "[population.2]\nactivation = relu\n",
        // kernel, delay, activation syntax
        "[domain]\nnodes = 5\n[kernel.11]\nfamily = gaussian 1\n",
        "[domain]\nnodes = 5\n[kernel.11]\nfamily = cauchy 1 2\n",
        "[domain]\nnodes = 5\n[kernel.11]\nfamily = gaussian 1 -0.5\n",
        "[domain]\nnodes = 5\n[delay.1]\nfamily = constant -1\n",
        "[domain]\nnodes = 5\n[delay.1]\nfamily = distance_proportional 0 1\n",
        "[domain]\nnodes = 5\n[population.1]\nactivation = logistic -1 4 0\n"
        "[population.2]\nactivation = relu\n",
        "[domain]\nnodes = 5\n[population.1]\nactivation = sigmoid 1 4 0\n"
        "[population.2]\nactivation = relu\n",
        // control values
        "[domain]\nnodes = 5\n[control]\nk = -2\n",
        "[domain]\nnodes = 5\n[control]\nmode = bang_bang\n",
        // numbers that do not parse cleanly
        "[domain]\nnodes = 5\n[solver]\ntol_res = 1e-\n",
        "[domain]\nnodes = 5\n[solver]\nseed = -3\n",
        "[domain]\nnodes = 5\n[simulation]\ndt = nan\n",
    };
    for (const char* text : cases) {
        INFO(text);
        CHECK_THROWS_AS(parse_config(text), ConfigError);
    }
}

TEST_CASE("two-dimensional configs parse the extra components") {
    auto c = parse_config(
        "[domain]\n"
        "dim = 2\n"
        "extent = 0 1 -1 1\n"
        "nodes = 9 7\n"
        "[population.1]\n"
        "tau = affine 1 0.1 -0.2\n"
        "I_star = gaussian 0.3 0.5 0 0.2\n"
        "activation = logistic 1 4 0\n"
        "[population.2]\n"
        "activation = relu\n");
    CHECK(c.domain.dimension == 2);
    CHECK(c.domain.upper[1] == 1.0);
    CHECK(c.domain.nodes[1] == 7);
    CHECK(c.pop1.tau.grad[1] == -0.2);
    CHECK(c.pop1.I_star.center[1] == 0.0);
    CHECK(c.pop1.I_star.width == 0.2);

    auto model = build_model(c);
    CHECK(model.domain->dimension() == 2);
    CHECK(model.node_count() == 63);

    // 1D arity in a 2D config is an error.
    CHECK_THROWS_AS(parse_config("[domain]\n"
                                 "dim = 2\n"
                                 "nodes = 9 7\n"
                                 "[population.1]\n"
                                 "tau = affine 1 0.1\n"
                                 "activation = relu\n"
                                 "[population.2]\n"
                                 "activation = relu\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("[domain]\n"
                                 "dim = 2\n"
                                 "extent = 0 1\n"
                                 "nodes = 9 7\n"
                                 "[population.1]\n"
                                 "activation = relu\n"
                                 "[population.2]\n"
                                 "activation = relu\n"),
                    ConfigError);
}

TEST_CASE("canonical text round-trips bit for bit") {
    auto check_roundtrip = [](const ScenarioConfig& c) {
        const std::string text = canonical_text(c);
        auto back = parse_config(text);
        CHECK(back == c);
        CHECK(canonical_text(back) == text);
        CHECK(config_hash(back) == config_hash(c));
    };
    check_roundtrip(parse_config(kMinimal));

    auto hairy = parse_config(kMinimal);
    hairy.pop1.I_star.kind = FieldExpr::Kind::gaussian;
    hairy.pop1.I_star.amplitude = 1.0 / 3.0;
    hairy.pop1.I_star.center[0] = 0.1;
    hairy.pop1.I_star.width = 7e-3;
    hairy.k12.family = KernelSpec::Family::mexican_hat;
    hairy.k12.p[0] = 0.30000000000000004;
    hairy.k12.p[1] = 1e-7;
    hairy.k12.p[2] = 2.0 / 7.0;
    hairy.k12.p[3] = 0.625;
    hairy.control.k_I = 1e300;
    hairy.solver.tol_res = 4.9e-324;  // denormal min
    hairy.simulation.dt = 0.1;
    check_roundtrip(hairy);
}

TEST_CASE("config hashes are stable and sensitive") {
    auto a = parse_config(kMinimal);
    auto b = parse_config(kMinimal);
    CHECK(config_hash(a) == config_hash(b));
    b.solver.seed = 54321;
    CHECK(config_hash(a) != config_hash(b));
    const std::string hex = hash_hex(config_hash(a));
    CHECK(hex.size() == 16);
    for (char ch : hex) CHECK(((ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f')));
}

TEST_CASE("build_model maps the controller by mode") {
    auto c = parse_config(kMinimal);
    c.control.k = 2.0;
    c.control.k_P = 0.5;
    c.control.k_I = 1.5;

    c.control.mode = ControlMode::open_loop;
    CHECK(build_model(c).controller == Controller::open_loop());
    c.control.mode = ControlMode::proportional;
    CHECK(build_model(c).controller == Controller::proportional(2.0));
    c.control.mode = ControlMode::prop_int;
    CHECK(build_model(c).controller == Controller::prop_int(0.5, 1.5));
}

TEST_CASE("build_model evaluates expressions over the grid") {
    auto c = parse_config(
        "[domain]\n"
        "nodes = 5\n"
        "rule = midpoint\n"
        "[population.1]\n"
        "tau = affine 0.8 0.4\n"
        "activation = logistic 1 4 0\n"
        "[population.2]\n"
        "activation = relu\n"
        "[kernel.21]\n"
        "family = constant 0.25\n");
    auto model = build_model(c);
    auto dom = model.domain;
    for (std::size_t a = 0; a < dom->node_count(); ++a) {
        CHECK(model.tau1[a] == Catch::Approx(0.8 + 0.4 * dom->coordinate(a, 0)));
        CHECK(model.tau2[a] == 1.0);
        CHECK(model.w21.entry(a, 2) == Catch::Approx(0.25 * dom->weight(2)));
    }
    CHECK(model.w11.is_zero());
    CHECK(model.d1.zero);
    CHECK(model.S2 == Activation::relu());
}

TEST_CASE("build_model rejects bad coefficient fields with config errors") {
    auto c = parse_config(kMinimal);
    c.pop1.tau = FieldExpr{};
    c.pop1.tau.kind = FieldExpr::Kind::affine;
    c.pop1.tau.offset = 0.1;
    c.pop1.tau.grad[0] = -1.0;  // crosses zero inside [0, 1]
    CHECK_THROWS_AS(build_model(c), ConfigError);

    c = parse_config(kMinimal);
    c.control.alpha = FieldExpr{};
    c.control.alpha.kind = FieldExpr::Kind::affine;
    c.control.alpha.offset = 0.5;
    c.control.alpha.grad[0] = -1.0;  // dips negative
    CHECK_THROWS_AS(build_model(c), ConfigError);
}

TEST_CASE("option adapters copy every field") {
    auto c = parse_config(kMinimal);
    c.solver.max_iterations = 77;
    c.solver.tol_res = 1e-8;
    c.solver.damping = 0.9;
    c.solver.anderson_depth = 2;
    c.solver.inner_tol = 1e-11;
    c.solver.multistart = 3;
    c.solver.seed = 9;
    c.solver.contraction_samples = 4;
    auto so = solver_options(c);
    CHECK(so.max_iterations == 77);
    CHECK(so.tol_res == 1e-8);
    CHECK(so.damping == 0.9);
    CHECK(so.anderson_depth == 2);
    CHECK(so.inner_tol == 1e-11);
    CHECK(so.multistart == 3);
    CHECK(so.seed == 9);
    CHECK(so.contraction_samples == 4);

    c.simulation.dt = 0.02;
    c.simulation.t_end = 3.0;
    c.simulation.method = Integrator::heun;
    c.simulation.stride = 7;
    c.simulation.blowup_threshold = 1e6;
    auto mo = simulation_options(c);
    CHECK(mo.dt == 0.02);
    CHECK(mo.t_end == 3.0);
    CHECK(mo.method == Integrator::heun);
    CHECK(mo.stride == 7);
    CHECK(mo.blowup_threshold == 1e6);
}

TEST_CASE("sweep keys form a closed registry") {
    auto c = parse_config(kMinimal);
    apply_sweep_value(c, "control.k", 2.5);
    CHECK(c.control.k == 2.5);
    apply_sweep_value(c, "control.k_P", 0.25);
    CHECK(c.control.k_P == 0.25);
    apply_sweep_value(c, "control.k_I", 1.25);
    CHECK(c.control.k_I == 1.25);

    try {
        apply_sweep_value(c, "solver.seed", 1.0);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("control.k") != std::string::npos);
    }
    CHECK_THROWS_AS(apply_sweep_value(c, "control.k", -1.0), ConfigError);
    CHECK(registered_sweep_keys().size() == 3);
}

TEST_CASE("the shipped scenario corpus loads, builds, and round-trips") {
    namespace fs = std::filesystem;
    std::size_t seen = 0;
    for (const auto& entry : fs::directory_iterator(NFIELD_SCENARIO_DIR)) {
        if (entry.path().extension() != ".cfg") continue;
        ++seen;
        INFO(entry.path().string());
        auto c = load_config(entry.path().string());
        auto model = build_model(c);
        CHECK(model.node_count() >= 2);
        auto back = parse_config(canonical_text(c));
        CHECK(back == c);
        CHECK(config_hash(back) == config_hash(c));
        // Every shipped scenario must expose runnable solver/sim settings.
        solver_options(c).validate();
        simulation_options(c).validate();
    }
    CHECK(seen >= 4);
}

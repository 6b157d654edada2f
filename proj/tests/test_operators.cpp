#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "nfield/operators.hpp"
#include "nfield/rng.hpp"
#include "oracles.hpp"

using namespace nfield;

TEST_CASE("rho applies the activations componentwise") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    Rng rng(31);
    auto x = helpers::random_pair(dom, rng, 4.0);
    auto z = apply_rho(x, model);
    for (std::size_t a = 0; a < dom->node_count(); ++a) {
        CHECK(z.pop1[a] == model.S1(x.pop1[a]));
        CHECK(z.pop2[a] == model.S2(x.pop2[a]));
    }
}

TEST_CASE("sigma vanishes in open loop and in its second component") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    Rng rng(37);
    auto x = helpers::random_pair(dom, rng, 4.0);

    auto s_open = apply_sigma(x, model);
    for (std::size_t a = 0; a < dom->node_count(); ++a) {
        CHECK(s_open.pop1[a] == 0.0);
        CHECK(s_open.pop2[a] == 0.0);
    }

    model.controller = Controller::proportional(2.5);
    auto s = apply_sigma(x, model);
    for (std::size_t a = 0; a < dom->node_count(); ++a) {
        CHECK(s.pop1[a] == 2.5 * model.alpha[a] * model.S1(x.pop1[a]));
        CHECK(s.pop2[a] == 0.0);
    }

    // PI control contributes through k_P in the stationary operators.
    model.controller = Controller::prop_int(1.5, 3.0);
    auto s_pi = apply_sigma(x, model);
    CHECK(s_pi.pop1[5] == 1.5 * model.alpha[5] * model.S1(x.pop1[5]));
}

TEST_CASE("sigma is monotone") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    model.controller = Controller::proportional(3.0);
    Rng rng(41);
    for (int i = 0; i < 50; ++i) {
        auto x = helpers::random_pair(dom, rng, 5.0);
        auto y = helpers::random_pair(dom, rng, 5.0);
        auto ds = sub(apply_sigma(x, model), apply_sigma(y, model));
        auto dx = sub(x, y);
        const double ip = l2_inner(ds.pop1, dx.pop1) + l2_inner(ds.pop2, dx.pop2);
        CHECK(ip >= -1e-12);
    }
}

TEST_CASE("W stacks the four kernel blocks") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    Rng rng(43);
    auto p = helpers::random_pair(dom, rng, 2.0);
    auto out = apply_W(p, model);
    auto c1 = add(model.w11.apply(p.pop1), model.w12.apply(p.pop2));
    auto c2 = add(model.w21.apply(p.pop1), model.w22.apply(p.pop2));
    for (std::size_t a = 0; a < dom->node_count(); ++a) {
        CHECK(out.pop1[a] == c1[a]);
        CHECK(out.pop2[a] == c2[a]);
    }
}

TEST_CASE("forcing folds the reference shift into population 1 only") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    auto f0 = forcing_f(model);
    for (std::size_t a = 0; a < dom->node_count(); ++a) {
        CHECK(f0.pop1[a] == model.Istar1[a]);
        CHECK(f0.pop2[a] == model.Istar2[a]);
    }
    model.controller = Controller::proportional(2.0);
    auto f = forcing_f(model);
    for (std::size_t a = 0; a < dom->node_count(); ++a) {
        CHECK(f.pop1[a] == model.Istar1[a] + 2.0 * model.alpha[a] * model.z_ref[a]);
        CHECK(f.pop2[a] == model.Istar2[a]);
    }
}

TEST_CASE("H is the identity plus sigma") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    model.controller = Controller::proportional(1.7);
    Rng rng(47);
    auto x = helpers::random_pair(dom, rng, 3.0);
    auto h = apply_H(x, model);
    auto s = apply_sigma(x, model);
    for (std::size_t a = 0; a < dom->node_count(); ++a) {
        CHECK(h.pop1[a] == x.pop1[a] + s.pop1[a]);
        CHECK(h.pop2[a] == x.pop2[a]);
    }
}

TEST_CASE("invert_H round-trips H across feedback gains") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    Rng rng(53);
    for (double gain : {0.5, 5.0, 50.0, 1e4}) {
        model.controller = Controller::proportional(gain);
        for (int i = 0; i < 20; ++i) {
            auto v = helpers::random_pair(dom, rng, 2.0);
            auto x = invert_H(v, model, 1e-12);
            auto back = apply_H(x, model);
            CHECK(pair_linf(sub(back, v)) <= 1e-9);
            // Population 2 passes through untouched.
            for (std::size_t a = 0; a < dom->node_count(); ++a) CHECK(x.pop2[a] == v.pop2[a]);
        }
    }
}

TEST_CASE("invert_H with zero gain returns its argument bit for bit") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    Rng rng(59);
    auto v = helpers::random_pair(dom, rng, 2.0);
    auto x = invert_H(v, model, 1e-12);
    for (std::size_t a = 0; a < dom->node_count(); ++a) {
        CHECK(x.pop1[a] == v.pop1[a]);
        CHECK(x.pop2[a] == v.pop2[a]);
    }
}

TEST_CASE("scalar H inversion agrees with plain bisection") {
    auto S = Activation::logistic(2.0, 3.0, 0.1);
    Rng rng(61);
    for (int i = 0; i < 100; ++i) {
        const double c = rng.uniform(0.0, 20.0);
        const double v = rng.uniform(-10.0, 10.0);
        const double s = detail::invert_h_scalar(v, c, S, 1e-13, 200);
        const double ref = oracle::bisect([&](double t) { return t + c * S(t) - v; },
                                          v - c * S.bound() - 1.0, v + c * S.bound() + 1.0);
        CHECK(s == Catch::Approx(ref).margin(1e-9));
    }
    // c = 0 short-circuits to the identity.
    CHECK(detail::invert_h_scalar(0.375, 0.0, S, 1e-13, 200) == 0.375);
}

TEST_CASE("rate map and input map are conjugate through rho") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    model.controller = Controller::proportional(1.3);
    Rng rng(67);
    const double lip = std::max(model.S1.lipschitz(), model.S2.lipschitz());
    for (int i = 0; i < 20; ++i) {
        auto x = helpers::random_pair(dom, rng, 3.0);
        auto lhs = apply_T(apply_rho(x, model), model);
        auto rhs = apply_rho(apply_Tcal(x, model), model);
        // Both routes evaluate S at the same argument up to association order.
        CHECK(pair_linf(sub(lhs, rhs)) <= lip * 1e-10 + 1e-12);

        // Residuals transfer with the Lipschitz constant.
        auto z = apply_rho(x, model);
        auto t_res = sub(apply_T(z, model), z);
        auto tcal_res = sub(apply_Tcal(x, model), x);
        for (std::size_t a = 0; a < dom->node_count(); ++a) {
            CHECK(std::abs(t_res.pop1[a]) <=
                  lip * std::abs(tcal_res.pop1[a]) + 1e-12);
            CHECK(std::abs(t_res.pop2[a]) <=
                  lip * std::abs(tcal_res.pop2[a]) + 1e-12);
        }
    }
}

TEST_CASE("pi solves H(pi(x)) = W(rho(x)) + f") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    model.controller = Controller::proportional(4.0);
    Rng rng(71);
    for (int i = 0; i < 20; ++i) {
        auto x = helpers::random_pair(dom, rng, 3.0);
        auto y = apply_pi(x, model, 1e-12);
        auto target = add(apply_W(apply_rho(x, model), model), forcing_f(model));
        CHECK(pair_linf(sub(apply_H(y, model), target)) <= 1e-9);
    }
}

TEST_CASE("a-priori bound follows the closed formula for bounded activations") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    model.controller = Controller::proportional(2.0);
    auto R = a_priori_bound(model);
    REQUIRE(R.has_value());

    const double hs = std::sqrt(std::pow(model.w11.hs_norm(), 2) +
                                std::pow(model.w12.hs_norm(), 2) +
                                std::pow(model.w21.hs_norm(), 2) +
                                std::pow(model.w22.hs_norm(), 2));
    const double expected = pair_norm(forcing_f(model)) +
                            hs * std::sqrt(2.0 * dom->volume()) * 1.0 +
                            2.0 * 1.0 * std::sqrt(dom->volume());
    CHECK(*R == Catch::Approx(expected).epsilon(1e-12));

    model.S2 = Activation::relu();
    CHECK_FALSE(a_priori_bound(model).has_value());
}

TEST_CASE("Tcal images of bounded models stay inside the a-priori ball") {
    auto dom = helpers::domain_1d(17);
    auto model = helpers::smooth_model(dom);
    model.controller = Controller::proportional(1.0);
    const double R = *a_priori_bound(model);
    Rng rng(73);
    for (int i = 0; i < 50; ++i) {
        auto x = helpers::random_pair(dom, rng, 100.0);
        CHECK(pair_norm(apply_Tcal(x, model)) <= R * (1.0 + 1e-9));
    }
}

#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nfield/activation.hpp"
#include "nfield/csv.hpp"
#include "nfield/domain.hpp"
#include "nfield/errors.hpp"
#include "nfield/kernel.hpp"
#include "nfield/model.hpp"
#include "nfield/simulator.hpp"
#include "nfield/solver.hpp"

namespace nfield {

// ---------------------------------------------------------------------------
// Scenario files: INI-style sections with `key = value` lines, `#` comments.
// Unknown sections and keys are rejected with the offending line number.
// The parsed form materializes every default, so canonical_text() emits a
// complete file and parse(canonical_text(c)) == c holds bitwise.
// ---------------------------------------------------------------------------

/// Spatial profile: `constant <v>`, bare `<v>`, `affine <c> <g...>` (offset
/// plus gradient dot r), or `gaussian <A> <center...> <width>`.
struct FieldExpr {
    enum class Kind { constant, affine, gaussian };
    Kind kind = Kind::constant;
    double value = 0.0;
    double offset = 0.0;
    double grad[2] = {0.0, 0.0};
    double amplitude = 0.0;
    double center[2] = {0.0, 0.0};
    double width = 1.0;

    bool operator==(const FieldExpr&) const = default;

    static FieldExpr constant_expr(double v) {
        FieldExpr e;
        e.value = v;
        return e;
    }

    Field evaluate(const DomainPtr& domain) const {
        const std::size_t n = domain->node_count();
        const int dim = domain->dimension();
        std::vector<double> vals(n);
        for (std::size_t a = 0; a < n; ++a) {
            const double* r = domain->node(a);
            switch (kind) {
                case Kind::constant:
                    vals[a] = value;
                    break;
                case Kind::affine: {
                    double v = offset;
                    for (int d = 0; d < dim; ++d) v += grad[d] * r[d];
                    vals[a] = v;
                    break;
                }
                case Kind::gaussian: {
                    double d2 = 0.0;
                    for (int d = 0; d < dim; ++d) {
                        const double dr = r[d] - center[d];
                        d2 += dr * dr;
                    }
                    vals[a] = amplitude * std::exp(-d2 / (2.0 * width * width));
                    break;
                }
            }
        }
        return Field(domain, std::move(vals));
    }
};

/// Translation-invariant kernel profile on the node distance.
struct KernelSpec {
    enum class Family { zero, constant, gaussian, mexican_hat };
    Family family = Family::zero;
    double p[4] = {0.0, 0.0, 0.0, 0.0};

    bool operator==(const KernelSpec&) const = default;

    KernelMatrix assemble(const DomainPtr& domain) const {
        switch (family) {
            case Family::zero:
                return zero_kernel(domain);
            case Family::constant: {
                const double c = p[0];
                return assemble_kernel(domain, [c](const double*, const double*) { return c; });
            }
            case Family::gaussian: {
                const double amp = p[0], w = p[1];
                const int dim = domain->dimension();
                return assemble_kernel(domain, [amp, w, dim](const double* r, const double* s) {
                    double d2 = 0.0;
                    for (int d = 0; d < dim; ++d) {
                        const double dr = r[d] - s[d];
                        d2 += dr * dr;
                    }
                    return amp * std::exp(-d2 / (2.0 * w * w));
                });
            }
            case Family::mexican_hat: {
                const double a1 = p[0], w1 = p[1], a2 = p[2], w2 = p[3];
                const int dim = domain->dimension();
                return assemble_kernel(domain,
                                       [a1, w1, a2, w2, dim](const double* r, const double* s) {
                                           double d2 = 0.0;
                                           for (int d = 0; d < dim; ++d) {
                                               const double dr = r[d] - s[d];
                                               d2 += dr * dr;
                                           }
                                           return a1 * std::exp(-d2 / (2.0 * w1 * w1)) -
                                                  a2 * std::exp(-d2 / (2.0 * w2 * w2));
                                       });
            }
        }
        throw Error("unreachable kernel family");
    }
};

struct DelaySpec {
    enum class Family { zero, constant, distance_proportional };
    Family family = Family::zero;
    double p[2] = {0.0, 0.0};  // constant: delay; distance_proportional: speed, cap

    bool operator==(const DelaySpec&) const = default;

    DelayMatrix assemble(const DomainPtr& domain) const {
        switch (family) {
            case Family::zero:
                return zero_delays(domain);
            case Family::constant:
                return constant_delays(domain, p[0]);
            case Family::distance_proportional:
                return distance_proportional_delays(domain, p[0], p[1]);
        }
        throw Error("unreachable delay family");
    }
};

struct DomainConfig {
    int dimension = 1;
    double lower[2] = {0.0, 0.0};
    double upper[2] = {1.0, 1.0};
    std::size_t nodes[2] = {0, 0};
    QuadratureRule rule = QuadratureRule::trapezoid;

    bool operator==(const DomainConfig&) const = default;
};

struct PopulationConfig {
    FieldExpr tau = FieldExpr::constant_expr(1.0);
    FieldExpr I_star = FieldExpr::constant_expr(0.0);
    Activation activation = Activation::logistic(1.0, 1.0, 0.0);

    bool operator==(const PopulationConfig&) const = default;
};

struct ControlConfig {
    ControlMode mode = ControlMode::open_loop;
    double k = 0.0;
    double k_P = 0.0;
    double k_I = 0.0;
    FieldExpr alpha = FieldExpr::constant_expr(1.0);
    FieldExpr z_ref = FieldExpr::constant_expr(0.0);

    bool operator==(const ControlConfig&) const = default;
};

struct SolverConfig {
    std::size_t max_iterations = 10000;
    double tol_res = 1e-10;
    double damping = 0.5;
    std::size_t anderson_depth = 5;
    double inner_tol = 0.0;  // materialized to tol_res / 100 after parsing
    std::size_t multistart = 1;
    std::uint64_t seed = 12345;
    std::size_t contraction_samples = 16;

    bool operator==(const SolverConfig&) const = default;
};

struct SimulationConfig {
    double dt = 1e-3;
    double t_end = 10.0;
    Integrator method = Integrator::euler;
    std::size_t stride = 100;
    FieldExpr prehistory_z1 = FieldExpr::constant_expr(0.0);
    FieldExpr prehistory_z2 = FieldExpr::constant_expr(0.0);
    double blowup_threshold = 1e12;

    bool operator==(const SimulationConfig&) const = default;
};

struct ScenarioConfig {
    DomainConfig domain;
    PopulationConfig pop1, pop2;
    KernelSpec k11, k12, k21, k22;
    DelaySpec delay1, delay2;
    ControlConfig control;
    SolverConfig solver;
    SimulationConfig simulation;

    bool operator==(const ScenarioConfig&) const = default;
};

namespace cfgdetail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline double parse_num(const std::string& tok, std::size_t lineno, const char* what) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + tok.size() || tok.empty())
        throw ConfigError(std::string("expected a number for ") + what + ", got '" + tok + "'",
                          lineno);
    if (!std::isfinite(v))
        throw ConfigError(std::string(what) + " must be finite, got '" + tok + "'", lineno);
    return v;
}

inline std::uint64_t parse_unsigned(const std::string& tok, std::size_t lineno,
                                    const char* what) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(begin, &end, 10);
    if (end != begin + tok.size() || tok.empty() || tok[0] == '-')
        throw ConfigError(
            std::string("expected a non-negative integer for ") + what + ", got '" + tok + "'",
            lineno);
    return static_cast<std::uint64_t>(v);
}

inline FieldExpr parse_field_expr(const std::string& text, int dim, std::size_t lineno,
                                  const char* what) {
    const auto toks = split_ws(text);
    if (toks.empty()) throw ConfigError(std::string("empty value for ") + what, lineno);
    FieldExpr e;
    if (toks.size() == 1 && toks[0] != "constant" && toks[0] != "affine" &&
        toks[0] != "gaussian") {
        e.kind = FieldExpr::Kind::constant;
        e.value = parse_num(toks[0], lineno, what);
        return e;
    }
    const std::string& head = toks[0];
    if (head == "constant") {
        if (toks.size() != 2)
            throw ConfigError(std::string(what) + ": constant takes one value", lineno);
        e.kind = FieldExpr::Kind::constant;
        e.value = parse_num(toks[1], lineno, what);
    } else if (head == "affine") {
        if (toks.size() != 2 + static_cast<std::size_t>(dim))
            throw ConfigError(std::string(what) + ": affine takes offset plus " +
                                  std::to_string(dim) + " gradient component(s)",
                              lineno);
        e.kind = FieldExpr::Kind::affine;
        e.offset = parse_num(toks[1], lineno, what);
        for (int d = 0; d < dim; ++d) e.grad[d] = parse_num(toks[2 + d], lineno, what);
    } else if (head == "gaussian") {
        if (toks.size() != 3 + static_cast<std::size_t>(dim))
            throw ConfigError(std::string(what) + ": gaussian takes amplitude, " +
                                  std::to_string(dim) + " center component(s), width",
                              lineno);
        e.kind = FieldExpr::Kind::gaussian;
        e.amplitude = parse_num(toks[1], lineno, what);
        for (int d = 0; d < dim; ++d) e.center[d] = parse_num(toks[2 + d], lineno, what);
        e.width = parse_num(toks[2 + dim], lineno, what);
        if (!(e.width > 0.0))
            throw ConfigError(std::string(what) + ": gaussian width must be > 0", lineno);
    } else {
        throw ConfigError(std::string(what) + ": unknown profile '" + head + "'", lineno);
    }
    return e;
}

inline KernelSpec parse_kernel(const std::string& text, std::size_t lineno, const char* what) {
    const auto toks = split_ws(text);
    if (toks.empty()) throw ConfigError(std::string("empty value for ") + what, lineno);
    KernelSpec k;
    const std::string& head = toks[0];
    if (head == "zero") {
        if (toks.size() != 1) throw ConfigError(std::string(what) + ": zero takes no values", lineno);
        k.family = KernelSpec::Family::zero;
    } else if (head == "constant") {
        if (toks.size() != 2)
            throw ConfigError(std::string(what) + ": constant takes one value", lineno);
        k.family = KernelSpec::Family::constant;
        k.p[0] = parse_num(toks[1], lineno, what);
    } else if (head == "gaussian") {
        if (toks.size() != 3)
            throw ConfigError(std::string(what) + ": gaussian takes amplitude and width", lineno);
        k.family = KernelSpec::Family::gaussian;
        k.p[0] = parse_num(toks[1], lineno, what);
        k.p[1] = parse_num(toks[2], lineno, what);
        if (!(k.p[1] > 0.0))
            throw ConfigError(std::string(what) + ": gaussian width must be > 0", lineno);
    } else if (head == "mexican_hat") {
        if (toks.size() != 5)
            throw ConfigError(std::string(what) + ": mexican_hat takes a1 w1 a2 w2", lineno);
        k.family = KernelSpec::Family::mexican_hat;
        for (int i = 0; i < 4; ++i) k.p[i] = parse_num(toks[1 + i], lineno, what);
        if (!(k.p[1] > 0.0) || !(k.p[3] > 0.0))
            throw ConfigError(std::string(what) + ": mexican_hat widths must be > 0", lineno);
    } else {
        throw ConfigError(std::string(what) + ": unknown kernel family '" + head + "'", lineno);
    }
    return k;
}

inline DelaySpec parse_delay(const std::string& text, std::size_t lineno, const char* what) {
    const auto toks = split_ws(text);
    if (toks.empty()) throw ConfigError(std::string("empty value for ") + what, lineno);
    DelaySpec d;
    const std::string& head = toks[0];
    if (head == "zero") {
        if (toks.size() != 1) throw ConfigError(std::string(what) + ": zero takes no values", lineno);
        d.family = DelaySpec::Family::zero;
    } else if (head == "constant") {
        if (toks.size() != 2)
            throw ConfigError(std::string(what) + ": constant takes one delay value", lineno);
        d.family = DelaySpec::Family::constant;
        d.p[0] = parse_num(toks[1], lineno, what);
        if (!(d.p[0] >= 0.0))
            throw ConfigError(std::string(what) + ": delay must be >= 0", lineno);
    } else if (head == "distance_proportional") {
        if (toks.size() != 3)
            throw ConfigError(std::string(what) + ": distance_proportional takes speed and cap",
                              lineno);
        d.family = DelaySpec::Family::distance_proportional;
        d.p[0] = parse_num(toks[1], lineno, what);
        d.p[1] = parse_num(toks[2], lineno, what);
        if (!(d.p[0] > 0.0))
            throw ConfigError(std::string(what) + ": propagation speed must be > 0", lineno);
        if (!(d.p[1] >= 0.0))
            throw ConfigError(std::string(what) + ": delay cap must be >= 0", lineno);
    } else {
        throw ConfigError(std::string(what) + ": unknown delay family '" + head + "'", lineno);
    }
    return d;
}

inline Activation parse_activation(const std::string& text, std::size_t lineno,
                                   const char* what) {
    const auto toks = split_ws(text);
    if (toks.empty()) throw ConfigError(std::string("empty value for ") + what, lineno);
    const std::string& head = toks[0];
    try {
        if (head == "logistic") {
            if (toks.size() != 4)
                throw ConfigError(std::string(what) + ": logistic takes L beta theta", lineno);
            return Activation::logistic(parse_num(toks[1], lineno, what),
                                        parse_num(toks[2], lineno, what),
                                        parse_num(toks[3], lineno, what));
        }
        if (head == "satlin") {
            if (toks.size() != 4)
                throw ConfigError(std::string(what) + ": satlin takes slope lo hi", lineno);
            return Activation::saturating_linear(parse_num(toks[1], lineno, what),
                                                 parse_num(toks[2], lineno, what),
                                                 parse_num(toks[3], lineno, what));
        }
        if (head == "linear") {
            if (toks.size() != 3)
                throw ConfigError(std::string(what) + ": linear takes slope offset", lineno);
            return Activation::linear(parse_num(toks[1], lineno, what),
                                      parse_num(toks[2], lineno, what));
        }
        if (head == "relu") {
            if (toks.size() != 1)
                throw ConfigError(std::string(what) + ": relu takes no values", lineno);
            return Activation::relu();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string(what) + ": " + e.what(), lineno);
    }
    throw ConfigError(std::string(what) + ": unknown activation '" + head + "'", lineno);
}

inline std::string serialize_field_expr(const FieldExpr& e, int dim) {
    using csv::format_double;
    switch (e.kind) {
        case FieldExpr::Kind::constant:
            return "constant " + format_double(e.value);
        case FieldExpr::Kind::affine: {
            std::string s = "affine " + format_double(e.offset);
            for (int d = 0; d < dim; ++d) s += " " + format_double(e.grad[d]);
            return s;
        }
        case FieldExpr::Kind::gaussian: {
            std::string s = "gaussian " + format_double(e.amplitude);
            for (int d = 0; d < dim; ++d) s += " " + format_double(e.center[d]);
            return s + " " + format_double(e.width);
        }
    }
    return {};
}

inline std::string serialize_kernel(const KernelSpec& k) {
    using csv::format_double;
    switch (k.family) {
        case KernelSpec::Family::zero:
            return "zero";
        case KernelSpec::Family::constant:
            return "constant " + format_double(k.p[0]);
        case KernelSpec::Family::gaussian:
            return "gaussian " + format_double(k.p[0]) + " " + format_double(k.p[1]);
        case KernelSpec::Family::mexican_hat:
            return "mexican_hat " + format_double(k.p[0]) + " " + format_double(k.p[1]) + " " +
                   format_double(k.p[2]) + " " + format_double(k.p[3]);
    }
    return {};
}

inline std::string serialize_delay(const DelaySpec& d) {
    using csv::format_double;
    switch (d.family) {
        case DelaySpec::Family::zero:
            return "zero";
        case DelaySpec::Family::constant:
            return "constant " + format_double(d.p[0]);
        case DelaySpec::Family::distance_proportional:
            return "distance_proportional " + format_double(d.p[0]) + " " +
                   format_double(d.p[1]);
    }
    return {};
}

inline std::string serialize_activation(const Activation& a) {
    using csv::format_double;
    switch (a.kind()) {
        case ActivationKind::logistic:
            return "logistic " + format_double(a.param0()) + " " + format_double(a.param1()) +
                   " " + format_double(a.param2());
        case ActivationKind::saturating_linear:
            return "satlin " + format_double(a.param0()) + " " + format_double(a.param1()) +
                   " " + format_double(a.param2());
        case ActivationKind::linear:
            return "linear " + format_double(a.param0()) + " " + format_double(a.param1());
        case ActivationKind::relu:
            return "relu";
    }
    return {};
}

struct RawEntry {
    std::string section, key, value;
    std::size_t lineno;
};

inline bool known_key(const std::string& section, const std::string& key) {
    auto in = [&key](std::initializer_list<const char*> keys) {
        for (const char* k : keys)
            if (key == k) return true;
        return false;
    };
    if (section == "domain") return in({"dim", "extent", "nodes", "rule"});
    if (section == "population.1" || section == "population.2")
        return in({"tau", "I_star", "activation"});
    if (section == "kernel.11" || section == "kernel.12" || section == "kernel.21" ||
        section == "kernel.22")
        return in({"family"});
    if (section == "delay.1" || section == "delay.2") return in({"family"});
    if (section == "control") return in({"mode", "k", "k_P", "k_I", "alpha", "z_ref"});
    if (section == "solver")
        return in({"max_iterations", "tol_res", "damping", "anderson_depth", "inner_tol",
                   "multistart", "seed", "contraction_samples"});
    if (section == "simulation")
        return in({"dt", "t_end", "method", "stride", "prehistory_z1", "prehistory_z2",
                   "blowup_threshold"});
    return false;
}

inline bool known_section(const std::string& s) {
    for (const char* name : {"domain", "population.1", "population.2", "kernel.11", "kernel.12",
                             "kernel.21", "kernel.22", "delay.1", "delay.2", "control", "solver",
                             "simulation"})
        if (s == name) return true;
    return false;
}

}  // namespace cfgdetail

inline ScenarioConfig parse_config(const std::string& text) {
    using namespace cfgdetail;

    std::vector<RawEntry> entries;
    {
        std::istringstream in(text);
        std::string line, section;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("malformed section header '" + line + "'", lineno);
                section = trim(line.substr(1, line.size() - 2));
                if (!known_section(section))
                    throw ConfigError("unknown section [" + section + "]", lineno);
                continue;
            }
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("expected 'key = value', got '" + line + "'", lineno);
            if (section.empty())
                throw ConfigError("key outside any section: '" + line + "'", lineno);
            RawEntry e;
            e.section = section;
            e.key = trim(line.substr(0, eq));
            e.value = trim(line.substr(eq + 1));
            e.lineno = lineno;
            if (e.key.empty()) throw ConfigError("empty key", lineno);
            if (e.value.empty()) throw ConfigError("empty value for key '" + e.key + "'", lineno);
            if (!known_key(e.section, e.key))
                throw ConfigError("unknown key '" + e.key + "' in [" + e.section + "]", lineno);
            entries.push_back(std::move(e));
        }
    }

    ScenarioConfig c;
    bool have_nodes = false, have_act1 = false, have_act2 = false;
    std::size_t extent_count = 0, nodes_count = 0;
    double extent_vals[4] = {0, 0, 0, 0};

    // Domain first: field-expression arity depends on the dimension.
    for (const RawEntry& e : entries) {
        if (e.section != "domain") continue;
        if (e.key == "dim") {
            const auto v = parse_unsigned(e.value, e.lineno, "dim");
            if (v != 1 && v != 2) throw ConfigError("dim must be 1 or 2", e.lineno);
            c.domain.dimension = static_cast<int>(v);
        } else if (e.key == "extent") {
            const auto toks = split_ws(e.value);
            if (toks.size() != 2 && toks.size() != 4)
                throw ConfigError("extent takes 'lo hi' per axis (2 or 4 numbers)", e.lineno);
            extent_count = toks.size();
            for (std::size_t i = 0; i < toks.size(); ++i)
                extent_vals[i] = parse_num(toks[i], e.lineno, "extent");
        } else if (e.key == "nodes") {
            const auto toks = split_ws(e.value);
            if (toks.size() != 1 && toks.size() != 2)
                throw ConfigError("nodes takes one count per axis", e.lineno);
            nodes_count = toks.size();
            for (std::size_t i = 0; i < toks.size(); ++i) {
                const auto v = parse_unsigned(toks[i], e.lineno, "nodes");
                if (v < 2) throw ConfigError("each axis needs at least 2 nodes", e.lineno);
                c.domain.nodes[i] = static_cast<std::size_t>(v);
            }
            have_nodes = true;
        } else if (e.key == "rule") {
            if (e.value == "midpoint")
                c.domain.rule = QuadratureRule::midpoint;
            else if (e.value == "trapezoid")
                c.domain.rule = QuadratureRule::trapezoid;
            else
                throw ConfigError("rule must be midpoint or trapezoid", e.lineno);
        }
    }
    const int dim = c.domain.dimension;
    if (!have_nodes) throw ConfigError("[domain] nodes is required");
    if (extent_count != 0 && extent_count != 2 * static_cast<std::size_t>(dim))
        throw ConfigError("extent has " + std::to_string(extent_count) +
                          " numbers but dim = " + std::to_string(dim));
    if (nodes_count != static_cast<std::size_t>(dim))
        throw ConfigError("nodes has " + std::to_string(nodes_count) +
                          " counts but dim = " + std::to_string(dim));
    if (extent_count > 0)
        for (int d = 0; d < dim; ++d) {
            c.domain.lower[d] = extent_vals[2 * d];
            c.domain.upper[d] = extent_vals[2 * d + 1];
        }
    for (int d = 0; d < dim; ++d)
        if (!(c.domain.lower[d] < c.domain.upper[d]))
            throw ConfigError("extent needs lo < hi on every axis");

    for (const RawEntry& e : entries) {
        const std::string& s = e.section;
        const std::string& k = e.key;
        const std::string& v = e.value;
        const std::size_t ln = e.lineno;
        const std::string label = "[" + s + "] " + k;
        const char* what = label.c_str();
        if (s == "domain") continue;

        if (s == "population.1" || s == "population.2") {
            PopulationConfig& p = (s == "population.1") ? c.pop1 : c.pop2;
            if (k == "tau")
                p.tau = parse_field_expr(v, dim, ln, what);
            else if (k == "I_star")
                p.I_star = parse_field_expr(v, dim, ln, what);
            else {
                p.activation = parse_activation(v, ln, what);
                (s == "population.1" ? have_act1 : have_act2) = true;
            }
        } else if (s.rfind("kernel.", 0) == 0) {
            KernelSpec& ks = s == "kernel.11"   ? c.k11
                             : s == "kernel.12" ? c.k12
                             : s == "kernel.21" ? c.k21
                                                : c.k22;
            ks = parse_kernel(v, ln, what);
        } else if (s == "delay.1" || s == "delay.2") {
            (s == "delay.1" ? c.delay1 : c.delay2) = parse_delay(v, ln, what);
        } else if (s == "control") {
            if (k == "mode") {
                if (v == "open_loop")
                    c.control.mode = ControlMode::open_loop;
                else if (v == "proportional")
                    c.control.mode = ControlMode::proportional;
                else if (v == "prop_int")
                    c.control.mode = ControlMode::prop_int;
                else
                    throw ConfigError("mode must be open_loop, proportional or prop_int", ln);
            } else if (k == "k" || k == "k_P" || k == "k_I") {
                const double g = parse_num(v, ln, what);
                if (!(g >= 0.0)) throw ConfigError(label + " must be >= 0", ln);
                (k == "k" ? c.control.k : k == "k_P" ? c.control.k_P : c.control.k_I) = g;
            } else if (k == "alpha") {
                c.control.alpha = parse_field_expr(v, dim, ln, what);
            } else {
                c.control.z_ref = parse_field_expr(v, dim, ln, what);
            }
        } else if (s == "solver") {
            if (k == "max_iterations")
                c.solver.max_iterations = static_cast<std::size_t>(parse_unsigned(v, ln, what));
            else if (k == "tol_res")
                c.solver.tol_res = parse_num(v, ln, what);
            else if (k == "damping")
                c.solver.damping = parse_num(v, ln, what);
            else if (k == "anderson_depth")
                c.solver.anderson_depth = static_cast<std::size_t>(parse_unsigned(v, ln, what));
            else if (k == "inner_tol")
                c.solver.inner_tol = parse_num(v, ln, what);
            else if (k == "multistart")
                c.solver.multistart = static_cast<std::size_t>(parse_unsigned(v, ln, what));
            else if (k == "seed")
                c.solver.seed = parse_unsigned(v, ln, what);
            else
                c.solver.contraction_samples =
                    static_cast<std::size_t>(parse_unsigned(v, ln, what));
        } else {  // simulation
            if (k == "dt")
                c.simulation.dt = parse_num(v, ln, what);
            else if (k == "t_end")
                c.simulation.t_end = parse_num(v, ln, what);
            else if (k == "method") {
                if (v == "euler")
                    c.simulation.method = Integrator::euler;
                else if (v == "heun")
                    c.simulation.method = Integrator::heun;
                else
                    throw ConfigError("method must be euler or heun", ln);
            } else if (k == "stride")
                c.simulation.stride = static_cast<std::size_t>(parse_unsigned(v, ln, what));
            else if (k == "prehistory_z1")
                c.simulation.prehistory_z1 = parse_field_expr(v, dim, ln, what);
            else if (k == "prehistory_z2")
                c.simulation.prehistory_z2 = parse_field_expr(v, dim, ln, what);
            else
                c.simulation.blowup_threshold = parse_num(v, ln, what);
        }
    }

    if (!have_act1) throw ConfigError("[population.1] activation is required");
    if (!have_act2) throw ConfigError("[population.2] activation is required");
    if (c.solver.inner_tol == 0.0) c.solver.inner_tol = c.solver.tol_res / 100.0;
    return c;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

/// Complete, fixed-order rendering with every default materialized.
/// parse_config(canonical_text(c)) == c, bitwise on every number.
inline std::string canonical_text(const ScenarioConfig& c) {
    using namespace cfgdetail;
    using csv::format_double;
    const int dim = c.domain.dimension;
    std::ostringstream out;

    out << "[domain]\n";
    out << "dim = " << dim << "\n";
    out << "extent =";
    for (int d = 0; d < dim; ++d)
        out << " " << format_double(c.domain.lower[d]) << " " << format_double(c.domain.upper[d]);
    out << "\n";
    out << "nodes =";
    for (int d = 0; d < dim; ++d) out << " " << c.domain.nodes[d];
    out << "\n";
    out << "rule = " << (c.domain.rule == QuadratureRule::midpoint ? "midpoint" : "trapezoid")
        << "\n";

    const PopulationConfig* pops[2] = {&c.pop1, &c.pop2};
    for (int i = 0; i < 2; ++i) {
        out << "\n[population." << (i + 1) << "]\n";
        out << "tau = " << serialize_field_expr(pops[i]->tau, dim) << "\n";
        out << "I_star = " << serialize_field_expr(pops[i]->I_star, dim) << "\n";
        out << "activation = " << serialize_activation(pops[i]->activation) << "\n";
    }

    const KernelSpec* kerns[4] = {&c.k11, &c.k12, &c.k21, &c.k22};
    const char* kern_names[4] = {"11", "12", "21", "22"};
    for (int i = 0; i < 4; ++i) {
        out << "\n[kernel." << kern_names[i] << "]\n";
        out << "family = " << serialize_kernel(*kerns[i]) << "\n";
    }

    const DelaySpec* delays[2] = {&c.delay1, &c.delay2};
    for (int i = 0; i < 2; ++i) {
        out << "\n[delay." << (i + 1) << "]\n";
        out << "family = " << serialize_delay(*delays[i]) << "\n";
    }

    out << "\n[control]\n";
    out << "mode = "
        << (c.control.mode == ControlMode::open_loop      ? "open_loop"
            : c.control.mode == ControlMode::proportional ? "proportional"
                                                          : "prop_int")
        << "\n";
    out << "k = " << format_double(c.control.k) << "\n";
    out << "k_P = " << format_double(c.control.k_P) << "\n";
    out << "k_I = " << format_double(c.control.k_I) << "\n";
    out << "alpha = " << serialize_field_expr(c.control.alpha, dim) << "\n";
    out << "z_ref = " << serialize_field_expr(c.control.z_ref, dim) << "\n";

    out << "\n[solver]\n";
    out << "max_iterations = " << c.solver.max_iterations << "\n";
    out << "tol_res = " << format_double(c.solver.tol_res) << "\n";
    out << "damping = " << format_double(c.solver.damping) << "\n";
    out << "anderson_depth = " << c.solver.anderson_depth << "\n";
    out << "inner_tol = " << format_double(c.solver.inner_tol) << "\n";
    out << "multistart = " << c.solver.multistart << "\n";
    out << "seed = " << c.solver.seed << "\n";
    out << "contraction_samples = " << c.solver.contraction_samples << "\n";

    out << "\n[simulation]\n";
    out << "dt = " << format_double(c.simulation.dt) << "\n";
    out << "t_end = " << format_double(c.simulation.t_end) << "\n";
    out << "method = " << integrator_name(c.simulation.method) << "\n";
    out << "stride = " << c.simulation.stride << "\n";
    out << "prehistory_z1 = " << serialize_field_expr(c.simulation.prehistory_z1, dim) << "\n";
    out << "prehistory_z2 = " << serialize_field_expr(c.simulation.prehistory_z2, dim) << "\n";
    out << "blowup_threshold = " << format_double(c.simulation.blowup_threshold) << "\n";

    return out.str();
}

/// FNV-1a over the canonical rendering; two configs hash equal iff their
/// materialized parameter sets match.
inline std::uint64_t config_hash(const ScenarioConfig& c) {
    const std::string text = canonical_text(c);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline DomainPtr make_domain(const ScenarioConfig& c) {
    SpatialDomain::Spec spec;
    spec.dimension = c.domain.dimension;
    for (int d = 0; d < c.domain.dimension; ++d) {
        spec.lower[d] = c.domain.lower[d];
        spec.upper[d] = c.domain.upper[d];
        spec.nodes_per_axis[d] = c.domain.nodes[d];
    }
    spec.rule = c.domain.rule;
    return build_domain(spec);
}

inline NeuralFieldModel build_model(const ScenarioConfig& c, DomainPtr domain) {
    NeuralFieldModel m;
    m.domain = domain;
    m.tau1 = c.pop1.tau.evaluate(domain);
    m.tau2 = c.pop2.tau.evaluate(domain);
    m.Istar1 = c.pop1.I_star.evaluate(domain);
    m.Istar2 = c.pop2.I_star.evaluate(domain);
    m.alpha = c.control.alpha.evaluate(domain);
    m.z_ref = c.control.z_ref.evaluate(domain);
    for (std::size_t a = 0; a < m.node_count(); ++a) {
        if (!(m.tau1[a] > 0.0) || !(m.tau2[a] > 0.0))
            throw ConfigError("tau must evaluate strictly positive over the whole domain");
        if (!(m.alpha[a] >= 0.0))
            throw ConfigError("[control] alpha must evaluate >= 0 over the whole domain");
    }
    m.w11 = c.k11.assemble(domain);
    m.w12 = c.k12.assemble(domain);
    m.w21 = c.k21.assemble(domain);
    m.w22 = c.k22.assemble(domain);
    m.d1 = c.delay1.assemble(domain);
    m.d2 = c.delay2.assemble(domain);
    m.S1 = c.pop1.activation;
    m.S2 = c.pop2.activation;
    switch (c.control.mode) {
        case ControlMode::open_loop:
            m.controller = Controller::open_loop();
            break;
        case ControlMode::proportional:
            m.controller = Controller::proportional(c.control.k);
            break;
        case ControlMode::prop_int:
            m.controller = Controller::prop_int(c.control.k_P, c.control.k_I);
            break;
    }
    m.validate();
    return m;
}

inline NeuralFieldModel build_model(const ScenarioConfig& c) {
    return build_model(c, make_domain(c));
}

inline SolverOptions solver_options(const ScenarioConfig& c) {
    SolverOptions o;
    o.max_iterations = c.solver.max_iterations;
    o.tol_res = c.solver.tol_res;
    o.damping = c.solver.damping;
    o.anderson_depth = c.solver.anderson_depth;
    o.inner_tol = c.solver.inner_tol;
    o.multistart = c.solver.multistart;
    o.seed = c.solver.seed;
    o.contraction_samples = c.solver.contraction_samples;
    return o;
}

inline SimulationOptions simulation_options(const ScenarioConfig& c) {
    SimulationOptions o;
    o.dt = c.simulation.dt;
    o.t_end = c.simulation.t_end;
    o.method = c.simulation.method;
    o.stride = c.simulation.stride;
    o.blowup_threshold = c.simulation.blowup_threshold;
    return o;
}

/// Keys the sweep command may vary. Anything else is rejected up front so a
/// typo cannot silently sweep nothing.
inline const std::vector<std::string>& registered_sweep_keys() {
    static const std::vector<std::string> keys = {"control.k", "control.k_P", "control.k_I"};
    return keys;
}

inline void apply_sweep_value(ScenarioConfig& c, const std::string& key, double value) {
    if (!(value >= 0.0)) throw ConfigError("sweep values for " + key + " must be >= 0");
    if (key == "control.k")
        c.control.k = value;
    else if (key == "control.k_P")
        c.control.k_P = value;
    else if (key == "control.k_I")
        c.control.k_I = value;
    else {
        std::string msg = "sweep key '" + key + "' is not registered; known keys:";
        for (const auto& k : registered_sweep_keys()) msg += " " + k;
        throw ConfigError(msg);
    }
}

}  // namespace nfield

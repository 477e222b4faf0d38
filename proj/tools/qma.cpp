#include "qma/identities.hpp"
#include "qma/io.hpp"
#include "qma/suites.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qma;

namespace {

// exit codes
constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kBadInput = 2;
constexpr int kNoConvergence = 3;

struct Common {
    int n = 1;
    int grid = 17;
    std::uint64_t seed = 1;
    std::string out = "qma-out";
};

void add_common(CLI::App* sub, Common& c, bool with_n = true) {
    if (with_n) sub->add_option("--n", c.n, "quaternionic dimension (1 or 2)")->capture_default_str();
    sub->add_option("--grid", c.grid, "points per axis (odd, >= 5)")->capture_default_str();
    sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
}

fs::path out_dir(const Common& c) {
    fs::path p(c.out);
    fs::create_directories(p);
    return p;
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw DomainError("cannot write " + p.string());
    os << std::setw(2) << j << '\n';
}

json read_json_arg(const std::string& s) {
    if (!s.empty() && s[0] == '@') {
        std::ifstream is(s.substr(1));
        if (!is) throw DomainError("cannot read " + s.substr(1));
        return json::parse(is);
    }
    return json::parse(s);
}

void require_n(int n) { require(n == 1 || n == 2, "--n must be 1 or 2"); }

// ---------------------------------------------------------------- identities

struct IdentitiesArgs {
    Common c;
    int n = 0;
    int trials = 100;
    std::vector<std::string> tags;
    bool corrupt = false;
};

int run_identities(const IdentitiesArgs& a) {
    std::vector<int> ns = a.n == 0 ? std::vector<int>{1, 2} : std::vector<int>{a.n};
    for (int n : ns) require_n(n);
    std::vector<IdentityTag> tags;
    for (const auto& t : a.tags) tags.push_back(parse_identity_tag(t));
    if (tags.empty()) tags = all_identity_tags();
    json reports = json::array();
    bool ok = true;
    for (int n : ns)
        for (IdentityTag t : tags) {
            const auto r = verify_identity(t, n, a.trials, a.c.seed, IdentityOptions{a.corrupt});
            std::cout << (r.passed ? "PASS " : "FAIL ") << to_string(t) << " n=" << n << " trials=" << r.trials
                      << " failures=" << r.failures << " worst=" << r.worst_residual << '\n';
            ok = ok && r.passed;
            reports.push_back(r.to_json());
        }
    write_json(out_dir(a.c) / "identities.json",
               {{"kind", "identities"}, {"corrupt", a.corrupt}, {"reports", reports}, {"status", ok ? "pass" : "fail"}});
    return ok ? kPass : kFail;
}

// ---------------------------------------------------------------- extremal

struct ExtremalArgs {
    Common c;
    double radius = 0.5;
    double outer = 1.0;
    double env_tol = 1e-8;
};

int run_extremal(const ExtremalArgs& a) {
    require_n(a.c.n);
    require(a.radius > 0.0 && a.radius < a.outer, "extremal: need 0 < radius < outer");
    const auto dir = out_dir(a.c);
    json summary{{"kind", "extremal"}, {"n", a.c.n}, {"grid", a.c.grid}, {"radius", a.radius}};
    GridField u;
    bool ok = true;
    if (a.c.n == 1) {
        // K = B(0, r) in B(0, R): compared against the closed form
        const auto s = run_ball_annulus(a.c.grid, a.radius, a.outer, &u);
        summary["domain"] = "ball";
        summary["outer"] = a.outer;
        summary["error"] = s.error;
        summary["sweeps"] = s.sweeps;
        summary["psh"] = s.psh;
        ok = s.psh;
    } else {
        const GridPtr g = Grid::cube(2, a.c.grid, -a.outer, a.outer);
        EnvelopeOptions opt;
        opt.tol = a.env_tol;
        const auto r = extremal_function(g, Region::ball(std::vector<double>(8, 0.0), a.radius), opt);
        u = r.u;
        const auto cert = psh_test(u);
        summary["domain"] = "cube";
        summary["half_width"] = a.outer;
        summary["sweeps"] = r.sweeps;
        summary["psh"] = cert.is_psh;
        ok = cert.is_psh;
    }
    summary["min"] = u.min_value();
    summary["max"] = u.max_value();
    summary["trace_sup"] = u.trace_sup_norm();
    ok = ok && u.min_value() >= -1.0 - 1e-12 && u.max_value() <= 1e-12;
    summary["status"] = ok ? "pass" : "fail";
    write_field((dir / "extremal.qf").string(), u, summary);
    write_csv_slice((dir / "extremal_slice.csv").string(), u);
    write_json(dir / "extremal.json", summary);
    std::cout << summary.dump() << '\n';
    return ok ? kPass : kFail;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
    Common c;
    int trials = 100;
    std::vector<std::string> suites;
    bool tight = false;
    double band = kDefaultBand;
    int pairs = 20;
    int fine = 33;
};

int run_verify_cmd(const VerifyArgs& a) {
    require_n(a.c.n);
    const auto dir = out_dir(a.c);
    std::vector<std::string> inequality;
    bool derivative = false, contact = false, uniqueness = false;
    for (const auto& s : a.suites) {
        if (s == "derivative")
            derivative = true;
        else if (s == "contact-set")
            contact = true;
        else if (s == "uniqueness")
            uniqueness = true;
        else
            inequality.push_back(s);
    }
    const bool run_inequality = a.suites.empty() || !inequality.empty();
    bool ok = true;
    json summary{{"kind", "verify"}};
    if (run_inequality) {
        VerifyConfig cfg;
        cfg.n = a.c.n;
        cfg.m = a.c.grid;
        cfg.trials = a.trials;
        cfg.seed = a.c.seed;
        cfg.suites = inequality;
        cfg.tol = a.tight ? TolerancePolicy::tight() : TolerancePolicy{1e-9, a.band};
        const auto s = run_verify(cfg);
        s.write_csv((dir / "margins.csv").string());
        summary["inequalities"] = s.to_json();
        for (const auto& [name, c] : summary["inequalities"]["checks"].items())
            std::cout << (c["violations"].get<int>() == 0 ? "PASS " : (c["gating"].get<bool>() ? "FAIL " : "DIAG "))
                      << name << " trials=" << c["trials"] << " violations=" << c["violations"]
                      << " worst_margin/tol=" << c["worst_margin_over_tol"] << '\n';
        for (const auto& e : s.errors) std::cout << "ERROR " << e << '\n';
        ok = ok && s.passed();
    }
    if (derivative) {
        const auto s = run_derivative(a.c.n, a.c.grid, a.pairs, a.c.seed);
        summary["derivative"] = s.to_json();
        std::cout << (s.passed() ? "PASS " : "FAIL ") << "derivative worst(+t)=" << s.worst_positive
                  << " worst(-t)=" << s.worst_negative << '\n';
        ok = ok && s.passed();
    }
    if (contact) {
        const auto s = run_contact_mass(a.c.n, a.c.grid, a.fine, a.trials, a.c.seed, 1e-11);
        summary["contact_set"] = s.to_json();
        std::cout << (s.passed() ? "PASS " : "FAIL ") << "contact-set mass " << s.mass_coarse << " -> " << s.mass_fine
                  << '\n';
        ok = ok && s.passed();
    }
    if (uniqueness) {
        const auto s = run_uniqueness(a.c.n, a.c.grid, std::min(a.trials, 5), a.c.seed);
        summary["uniqueness"] = s.to_json();
        std::cout << (s.passed() ? "PASS " : "FAIL ") << "uniqueness worst=" << s.worst() << '\n';
        ok = ok && s.passed();
    }
    summary["status"] = ok ? "pass" : "fail";
    write_json(dir / "verify.json", summary);
    return ok ? kPass : kFail;
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
    Common c;
    std::string problem = R"({"type": "constant", "value": 1.0})";
    std::string method = "variational";
    double lo = -1.0, hi = 1.0;
    std::string initial;
    int max_iters = 200;
    double tol = 1e-6;
};

int run_solve(const SolveArgs& a) {
    require_n(a.c.n);
    const auto dir = out_dir(a.c);
    const GridPtr g = Grid::cube(a.c.n, a.c.grid, a.lo, a.hi);
    const Problem P = problem_from_json(g, read_json_arg(a.problem));
    SolveConfig cfg;
    cfg.method = solve_method_from_string(a.method);
    cfg.max_iters = a.max_iters;
    cfg.tol_residual = a.tol;
    cfg.validate();
    std::optional<GridField> init;
    if (!a.initial.empty()) {
        init = read_field(a.initial);
        require(init->grid().same_as(*g), "solve: initial field lives on a different grid");
    }
    const auto r = solve(P.mu, cfg, &P.trace, init ? &*init : nullptr);
    json summary = r.to_json();
    summary["kind"] = "solve";
    summary["problem"] = read_json_arg(a.problem);
    summary["grid"] = g->to_json();
    if (P.exact) summary["error"] = sup_distance(r.phi, *P.exact);
    const bool ok = r.converged && r.psh.is_psh;
    summary["status"] = ok ? "pass" : "fail";
    summary.erase("energy_trace");
    summary.erase("step_trace");
    write_field((dir / "phi.qf").string(), r.phi, {{"method", to_string(r.method)}});
    write_csv_slice((dir / "phi_slice.csv").string(), r.phi);
    {
        std::ofstream os(dir / "solve_trace.csv");
        os << "iteration,energy,step\n";
        for (std::size_t k = 0; k < r.energy_trace.size(); ++k)
            os << k << ',' << fmt_double(r.energy_trace[k]) << ','
               << (k < r.step_trace.size() ? fmt_double(r.step_trace[k]) : "") << '\n';
    }
    write_json(dir / "solve.json", summary);
    std::cout << summary.dump() << '\n';
    if (!r.converged) return kNoConvergence;
    return ok ? kPass : kFail;
}

// ---------------------------------------------------------------- energy

struct EnergyArgs {
    Common c;
    std::string field;
    std::string family = "zero-trace";
    std::vector<double> ps{1.0, 2.0};
};

int run_energy(const EnergyArgs& a) {
    const auto dir = out_dir(a.c);
    GridField u;
    json source;
    if (!a.field.empty()) {
        u = read_field(a.field);
        source = {{"field", a.field}};
    } else {
        require_n(a.c.n);
        const TestFunctions gen(Grid::cube(a.c.n, a.c.grid, -1.0, 1.0));
        Rng rng = trial_rng(a.c.seed, 0);
        if (a.family == "zero-trace")
            u = gen.zero_trace(rng);
        else if (a.family == "extremal")
            u = gen.extremal(rng);
        else if (a.family == "maximum")
            u = gen.maximum(rng);
        else
            throw DomainError("energy: unknown family " + a.family);
        source = {{"family", a.family}, {"seed", a.c.seed}, {"n", a.c.n}, {"grid", a.c.grid}};
        write_field((dir / "energy_input.qf").string(), u, source);
    }
    const auto d = class_diagnostics(u, a.ps);
    json summary = d.to_json();
    summary["kind"] = "energy";
    summary["source"] = source;
    const bool ok = d.psh.is_psh && d.trace_sup <= 1e-12;
    summary["status"] = ok ? "pass" : "fail";
    write_json(dir / "energy.json", summary);
    std::cout << summary.dump() << '\n';
    return ok ? kPass : kFail;
}

// ---------------------------------------------------------------- report

int run_report(const Common& c) {
    const fs::path dir(c.out);
    require(fs::is_directory(dir), "report: no such directory " + c.out);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto& p = e.path();
        if (p.extension() == ".json" && p.stem().extension() != ".qf" && p.filename() != "report.json")
            files.push_back(p);
    }
    std::sort(files.begin(), files.end());
    json entries = json::object();
    bool ok = true;
    for (const auto& p : files) {
        std::ifstream is(p);
        const json j = json::parse(is);
        const std::string status = j.value("status", "unknown");
        entries[p.stem().string()] = {{"kind", j.value("kind", "unknown")}, {"status", status}};
        std::cout << (status == "pass" ? "PASS " : "FAIL ") << p.filename().string() << '\n';
        ok = ok && status == "pass";
    }
    require(!files.empty(), "report: no result files in " + c.out);
    write_json(dir / "report.json", {{"entries", entries}, {"status", ok ? "pass" : "fail"}});
    return ok ? kPass : kFail;
}

// Config files are read by the root parser; hoist --config so it may also
// follow the subcommand name.
std::vector<std::string> hoist_config(int argc, char** argv) {
    std::vector<std::string> front, rest;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) {
            front.push_back(a);
            front.push_back(argv[++i]);
        } else if (a.starts_with("--config=")) {
            front.push_back(a);
        } else {
            rest.push_back(a);
        }
    }
    front.insert(front.end(), rest.begin(), rest.end());
    std::reverse(front.begin(), front.end());  // App::parse(vector) expects reversed order
    return front;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qma: quaternionic Monge-Ampere numerical harness"};
    app.set_config("--config", "", "TOML or INI file; [subcommand] sections hold option values");
    app.footer("Exit codes: 0 all checks passed, 1 a check failed, 2 invalid input, 3 no convergence.");
    app.require_subcommand(1);

    IdentitiesArgs ia;
    auto* id = app.add_subcommand("identities", "verify the symbolic identities on random polynomial forms");
    add_common(id, ia.c, false);
    id->add_option("--n", ia.n, "1, 2, or 0 for both")->capture_default_str();
    id->add_option("--trials", ia.trials, "random trials per identity")->capture_default_str();
    id->add_option("--tag", ia.tags, "identity tag (repeatable); default all");
    id->add_flag("--corrupt", ia.corrupt, "inject a sign fault into d0/d1 (the run must fail)");

    ExtremalArgs ea;
    auto* ex = app.add_subcommand("extremal", "relative extremal function of a ball");
    add_common(ex, ea.c);
    ex->add_option("--radius", ea.radius, "radius of K")->capture_default_str();
    ex->add_option("--outer", ea.outer, "domain radius (n=1) or cube half width (n=2)")->capture_default_str();
    ex->add_option("--env-tol", ea.env_tol, "envelope sweep tolerance")->capture_default_str();

    VerifyArgs va;
    auto* ve = app.add_subcommand("verify", "seeded inequality suites");
    add_common(ve, va.c);
    ve->add_option("--trials", va.trials, "trials (obstacles for contact-set)")->capture_default_str();
    ve->add_option("--suite", va.suites,
                   "suite (repeatable): inequality suites, or derivative, contact-set, uniqueness; "
                   "default all inequality suites");
    ve->add_flag("--tight", va.tight, "drop the discretisation band from the tolerance");
    ve->add_option("--band", va.band, "discretisation band constant")->capture_default_str();
    ve->add_option("--pairs", va.pairs, "pairs for the derivative suite")->capture_default_str();
    ve->add_option("--fine", va.fine, "fine grid for the contact-set suite")->capture_default_str();

    SolveArgs sa;
    auto* so = app.add_subcommand("solve", "Dirichlet problem (Delta phi)^n = mu");
    add_common(so, sa.c);
    so->add_option("--problem", sa.problem, "problem JSON or @file")->capture_default_str();
    so->add_option("--method", sa.method, "variational or direct-n1")->capture_default_str();
    so->add_option("--lo", sa.lo, "box lower corner")->capture_default_str();
    so->add_option("--hi", sa.hi, "box upper corner")->capture_default_str();
    so->add_option("--initial", sa.initial, "initial field file (variational)");
    so->add_option("--max-iters", sa.max_iters, "iteration budget")->capture_default_str();
    so->add_option("--tol", sa.tol, "residual tolerance relative to sup mu")->capture_default_str();

    EnergyArgs na;
    auto* en = app.add_subcommand("energy", "energies and class diagnostics of a field");
    add_common(en, na.c);
    en->add_option("--field", na.field, "input field file; otherwise a seeded test function");
    en->add_option("--family", na.family, "zero-trace, extremal or maximum")->capture_default_str();
    en->add_option("--p", na.ps, "exponents")->capture_default_str();

    Common rc;
    auto* re = app.add_subcommand("report", "aggregate the JSON summaries in --out");
    add_common(re, rc);

    try {
        auto args = hoist_config(argc, argv);
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kBadInput;
    }
    try {
        if (*id) return run_identities(ia);
        if (*ex) return run_extremal(ea);
        if (*ve) return run_verify_cmd(va);
        if (*so) return run_solve(sa);
        if (*en) return run_energy(na);
        if (*re) return run_report(rc);
    } catch (const ConvergenceError& e) {
        std::cerr << "qma: " << e.what() << " (residual " << e.residual() << " after " << e.iterations() << ")\n";
        return kNoConvergence;
    } catch (const json::exception& e) {
        std::cerr << "qma: bad JSON: " << e.what() << '\n';
        return kBadInput;
    } catch (const std::exception& e) {
        std::cerr << "qma: " << e.what() << '\n';
        return kBadInput;
    }
    return kBadInput;
}

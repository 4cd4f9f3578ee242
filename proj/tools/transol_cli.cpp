// transol command-line driver: solve, check, diff, probe, limits.
#include <transol/geometry.hpp>
#include <transol/levelsets.hpp>
#include <transol/surfaces.hpp>
#include <transol/translator.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace transol;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Symbolic widths: products and quotients of numbers, pi and sqrt2.

double parse_factor(const std::string& t) {
    if (t == "pi") return pi;
    if (t == "sqrt2" || t == "sqrt(2)") return std::sqrt(2.0);
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != t.size()) throw UsageError("cannot read '" + t + "' as a number");
    return v;
}

double parse_real(std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
    if (s.empty()) throw UsageError("empty numeric value");
    double v = 1;
    char op = '*';
    std::size_t p = 0;
    while (p <= s.size()) {
        const std::size_t q = s.find_first_of("*/", p);
        const std::string tok = s.substr(p, q == std::string::npos ? std::string::npos : q - p);
        const double f = parse_factor(tok);
        v = op == '*' ? v * f : v / f;
        if (q == std::string::npos) break;
        op = s[q];
        p = q + 1;
    }
    return v;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(item));
    return out;
}

// ---------------------------------------------------------------------------
// Options. Every field can come from the JSON config; flags override.

struct Options {
    std::string config, out = "out";
    std::uint64_t seed = 1;
    int jobs = 1;
    bool verbose = false;

    // surface / solver
    std::string surface, w, h, x_min, x_max, x_hat, alpha, L, a, b, caps;
    std::string init_seed = "zero";
    bool calibrate = false, obj = false;
    int copies = 1;
    double newton_tol = 1e-10;
    int max_newton_iters = 60;
    std::string linear_solver = "banded";

    // field input
    std::string field, domain;

    // check
    std::string axis_x = "20", axis_y = "0", R;
    int direction = -1, side = -1;
    double eps_target = 5;
    long samples = 100000;

    // diff
    std::string fixture, u1, u2, domain1, domain2, xi_x = "0.3", xi_y = "0.2";

    // probe / limits
    std::string runs, widths = "pi/2,pi/4,pi/8";
};

template <class T>
void take(const json& j, const char* key, T& dst) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if constexpr (std::is_same_v<T, std::string>) {
        dst = v.is_string() ? v.get<std::string>() : v.dump();
    } else {
        dst = v.get<T>();
    }
}

void load_config(const std::string& path, Options& o) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot read config " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    take(j, "out", o.out);
    take(j, "seed", o.seed);
    take(j, "jobs", o.jobs);
    take(j, "surface", o.surface);
    take(j, "w", o.w);
    take(j, "h", o.h);
    take(j, "xmin", o.x_min);
    take(j, "xmax", o.x_max);
    take(j, "x-hat", o.x_hat);
    take(j, "alpha", o.alpha);
    take(j, "L", o.L);
    take(j, "a", o.a);
    take(j, "b", o.b);
    take(j, "caps", o.caps);
    take(j, "init", o.init_seed);
    take(j, "calibrate", o.calibrate);
    take(j, "obj", o.obj);
    take(j, "copies", o.copies);
    take(j, "newton-tol", o.newton_tol);
    take(j, "max-newton-iters", o.max_newton_iters);
    take(j, "linear-solver", o.linear_solver);
    take(j, "field", o.field);
    take(j, "domain", o.domain);
    take(j, "axis-x", o.axis_x);
    take(j, "axis-y", o.axis_y);
    take(j, "R", o.R);
    take(j, "direction", o.direction);
    take(j, "side", o.side);
    take(j, "eps-target", o.eps_target);
    take(j, "samples", o.samples);
    take(j, "fixture", o.fixture);
    take(j, "u1", o.u1);
    take(j, "u2", o.u2);
    take(j, "domain1", o.domain1);
    take(j, "domain2", o.domain2);
    take(j, "xi-x", o.xi_x);
    take(j, "xi-y", o.xi_y);
    take(j, "runs", o.runs);
    take(j, "widths", o.widths);
}

json echo(const Options& o, const std::string& cmd) {
    return json{{"command", cmd},       {"seed", o.seed},          {"jobs", o.jobs},
                {"surface", o.surface}, {"w", o.w},                {"h", o.h},
                {"xmin", o.x_min},      {"xmax", o.x_max},         {"x-hat", o.x_hat},
                {"alpha", o.alpha},     {"L", o.L},                {"a", o.a},
                {"b", o.b},             {"caps", o.caps},          {"init", o.init_seed},
                {"calibrate", o.calibrate}, {"obj", o.obj},        {"copies", o.copies},
                {"newton-tol", o.newton_tol}, {"max-newton-iters", o.max_newton_iters},
                {"linear-solver", o.linear_solver}, {"field", o.field}, {"domain", o.domain},
                {"axis-x", o.axis_x},   {"axis-y", o.axis_y},      {"R", o.R},
                {"direction", o.direction}, {"side", o.side},      {"eps-target", o.eps_target},
                {"samples", o.samples}, {"fixture", o.fixture},    {"u1", o.u1},
                {"u2", o.u2},           {"domain1", o.domain1},    {"domain2", o.domain2},
                {"xi-x", o.xi_x},       {"xi-y", o.xi_y},          {"runs", o.runs},
                {"widths", o.widths}};
}

// ---------------------------------------------------------------------------
// Artifacts and manifest.

std::string sha256_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::vector<char> buf(1 << 16);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    while (f) {
        f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(f.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    EVP_DigestFinal_ex(ctx, md, &n);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int k = 0; k < n; ++k) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
    return os.str();
}

class Artifacts {
public:
    explicit Artifacts(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    fs::path path(const std::string& name) {
        names_.push_back(name);
        return dir_ / name;
    }
    void text(const std::string& name, const std::string& body) {
        std::ofstream f(path(name));
        f << body << "\n";
    }
    void write_manifest(const json& config) const {
        json m{{"config", config}, {"artifacts", json::array()}};
        for (const auto& n : names_) m["artifacts"].push_back({{"path", n}, {"sha256", sha256_file(dir_ / n)}});
        std::ofstream f(dir_ / "manifest.json");
        f << m.dump(2) << "\n";
    }

private:
    fs::path dir_;
    std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------
// Surfaces and fields from options.

double opt_real(const std::string& s, double dflt) { return s.empty() ? dflt : parse_real(s); }

SurfaceKind surface_from(const Options& o) {
    if (o.surface.empty()) throw UsageError("--surface is required");
    if (o.w.empty() && o.surface != "trident") throw UsageError("--w is required");
    SurfaceKind k;
    k.type = surface_type_from_string(o.surface);
    k.w = opt_real(o.w, 0);
    // Decimal spellings of pi (3.14159265) denote the threshold width itself.
    if (k.w != pi && std::abs(k.w / pi - 1) <= 1e-7) {
        std::cerr << "note: width " << o.w << " read as pi\n";
        k.w = pi;
    }
    k.x_hat = opt_real(o.x_hat, 0);
    k.alpha = opt_real(o.alpha, pi / 2);
    k.L = opt_real(o.L, 0);
    if (k.type == SurfaceType::trident) {
        k.a = opt_real(o.a, 1);
        k.b = k.w = opt_real(o.b, opt_real(o.w, 0));
        if (!o.calibrate && !(k.b > 0)) throw UsageError("trident needs --b (or --calibrate)");
    }
    if (k.type == SurfaceType::scherk && !o.calibrate && !(k.L > 0)) throw UsageError("scherk needs --L (or --calibrate)");
    return k;
}

PieceConfig piece_config(const Options& o) {
    PieceConfig c;
    c.h = opt_real(o.h, 0);
    if (!o.x_min.empty()) c.x_min = parse_real(o.x_min);
    if (!o.x_max.empty()) c.x_max = parse_real(o.x_max);
    if (!o.caps.empty()) c.solver.cap_schedule = parse_list(o.caps);
    c.solver.newton_tol = o.newton_tol;
    c.solver.max_newton_iters = o.max_newton_iters;
    c.solver.verbose = o.verbose;
    if (o.linear_solver == "iterative") c.solver.linear_solver = LinearSolverKind::stabilized_iterative;
    else if (o.linear_solver != "banded") throw UsageError("--linear-solver must be banded or iterative");
    if (o.init_seed == "capped-harmonic") c.seed = Seed::capped_harmonic;
    else if (o.init_seed != "zero") throw UsageError("--init must be zero or capped-harmonic");
    return c;
}

PieceResult build_piece(const Options& o, const SurfaceKind& k) {
    const PieceConfig c = piece_config(o);
    if (o.calibrate) {
        switch (k.type) {
            case SurfaceType::helicoid: return helicoid_axis_calibrate(k.w, c);
            case SurfaceType::scherk: return scherk_length_calibrate(k.alpha, k.w, c);
            case SurfaceType::trident: return trident_width_calibrate(k.a, c);
            default: throw UsageError("--calibrate applies to helicoid, scherk and trident");
        }
    }
    return construct_piece(k, c);
}

DomainSpec read_domain(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot read domain " + path);
    const json j = json::parse(f);
    DomainSpec d;
    d.kind = domain_kind_from_string(j.at("kind").get<std::string>());
    d.w = j.at("w");
    d.x_min = j.at("x_min");
    d.x_max = j.at("x_max");
    d.alpha = j.value("alpha", pi / 2);
    d.L = j.value("L", 0.0);
    d.h = j.at("h");
    d.y_lo = j.value("y_lo", 0.0);
    d.y_hi = j.value("y_hi", -1.0);
    return d;
}

ScalarField read_field(const std::string& csv, const std::string& domain) {
    if (domain.empty()) throw UsageError("a field CSV needs its domain JSON (--domain)");
    std::ifstream f(csv);
    if (!f) throw UsageError("cannot read field " + csv);
    return read_csv(f, read_domain(domain));
}

// Field for check: CSV input, or a fresh solve of --surface.
ScalarField input_field(const Options& o, double& w) {
    if (!o.field.empty()) {
        ScalarField u = read_field(o.field, o.domain);
        w = u.grid->spec.w;
        return u;
    }
    const SurfaceKind k = surface_from(o);
    w = k.w;
    if (k.type == SurfaceType::grim_reaper || k.type == SurfaceType::tilted_grim_reaper) {
        const double h = opt_real(o.h, w / 32);
        DomainSpec d = DomainSpec::strip(w, opt_real(o.x_min, -8), opt_real(o.x_max, 8), h);
        d.y_lo = h;
        d.y_hi = w - h;
        return grim_reaper_field(w, d);
    }
    return build_piece(o, k).field;
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_solve(const Options& o) {
    const SurfaceKind k = surface_from(o);
    Artifacts art(o.out);
    json rep;
    if (k.type == SurfaceType::grim_reaper || k.type == SurfaceType::tilted_grim_reaper) {
        double w = k.w;
        Options q = o;
        ScalarField u = input_field(q, w);
        write_csv(u, art.path("u.csv").string());
        art.text("domain.json", domain_json(u.grid->spec));
        const double h = std::max(u.grid->hx, u.grid->hy);
        const double r = interior_sup(translator_residual(u));
        rep = {{"surface", json::parse(k.to_json())},
               {"exact", true},
               {"residual_sup", r},
               {"residual_over_h2", r / (h * h)}};
        if (o.obj) write_obj(graph_mesh(u), art.path("surface.obj").string());
    } else {
        PieceResult p = build_piece(o, k);
        write_csv(p.field, art.path("u.csv").string());
        art.text("domain.json", domain_json(p.field.grid->spec));
        rep = {{"surface", json::parse(p.kind.to_json())}, {"solve", json::parse(p.report.to_json())}};
        if (p.bootstrap) rep["bootstrap"] = json::parse(p.bootstrap->to_json());
        if (p.calibration) rep["calibration"] = json::parse(p.calibration->to_json());
        if (o.obj) write_obj(schwarz_reflect(p, o.copies), art.path("surface.obj").string());
    }
    art.text("report.json", rep.dump(2));
    art.write_manifest(echo(o, "solve"));
    std::cout << rep.dump(2) << "\n";
    return 0;
}

int cmd_check(const std::string& what, const Options& o) {
    Artifacts art(o.out);
    json rep;
    const std::array<double, 2> p_a{parse_real(o.axis_x), parse_real(o.axis_y)};
    if (what == "delta") {
        if (o.R.empty() || o.w.empty()) throw UsageError("check delta needs --R and --w");
        const double R = parse_real(o.R), w = parse_real(o.w);
        rep = {{"p_a", p_a}, {"R", R}, {"w", w}, {"delta", delta_bound(p_a, R, w)}};
    } else {
        double w = 0;
        const ScalarField u = input_field(o, w);
        if (what == "gauss") {
            const auto n = gauss_map(u);
            const auto inj = gauss_injectivity_sample(u, o.samples, o.seed);
            rep = {{"injectivity", json::parse(inj.to_json())}, {"vertical_points", n.vertical_points.size()}};
            if (n.attains_e3() || inj.collisions > 0) {
                rep["warning"] = "degenerate Gauss map: normal is vertical or repeats";
                std::cerr << "warning: degenerate Gauss map\n";
            }
        } else if (what == "theta") {
            if (o.R.empty()) throw UsageError("check theta needs --R");
            const auto tg = theta_graph_check(u, p_a, ThetaRegion::omega(o.side, parse_real(o.R)));
            rep = json::parse(tg.to_json());
            rep["verdict"] = tg.pass ? "PASS" : "FAIL";
            std::ofstream f(art.path("critical.csv"));
            f << "x,y\n" << std::setprecision(17);
            for (const auto& p : tg.critical) f << p[0] << "," << p[1] << "\n";
        } else if (what == "slope") {
            const auto sb = slope_bound_scan(u, o.direction, o.eps_target);
            if (!sb) {
                rep = {{"found", false}};
            } else {
                rep = json::parse(sb->to_json());
                rep["found"] = true;
                std::ofstream f(art.path("slope_profile.csv"));
                f << "x,min_ratio\n" << std::setprecision(17);
                for (const auto& p : sb->profile) f << p[0] << "," << p[1] << "\n";
            }
        } else {
            throw UsageError("check takes gauss, theta, slope or delta");
        }
    }
    art.text("report.json", rep.dump(2));
    art.write_manifest(echo(o, "check " + what));
    std::cout << rep.dump(2) << "\n";
    return 0;
}

int cmd_diff(const Options& o) {
    Artifacts art(o.out);
    ScalarField v;
    Point2 xi{0, 0};
    ClassifyContext ctx;
    json rep;
    if (!o.fixture.empty()) {
        v = analytic_fixture(o.fixture, opt_real(o.h, 1.0 / 64));
        rep["fixture"] = o.fixture;
    } else {
        ScalarField a, b;
        double w = 0;
        if (!o.u1.empty()) {
            a = read_field(o.u1, o.domain1);
            b = read_field(o.u2, o.domain2.empty() ? o.domain1 : o.domain2);
            w = a.grid->spec.w;
        } else {
            const SurfaceKind k = surface_from(o);
            w = k.w;
            PieceConfig c = piece_config(o);
            c.seed = Seed::zero;
            a = construct_piece(k, c).field;
            c.seed = Seed::capped_harmonic;
            b = construct_piece(k, c).field;
        }
        xi = {parse_real(o.xi_x), parse_real(o.xi_y)};
        const auto d = difference_field({a, b, xi, w});
        if (d.snapped) std::cerr << "warning: " << d.warning << "\n";
        v = d.v;
        ctx.xi = d.xi;
        ctx.w = w;
        rep["xi"] = d.xi;
        rep["snapped"] = d.snapped;
    }
    const auto cps = find_critical_points(v);
    const auto set = classify_arcs(extract_zero_arcs(v, cps), ctx);
    const auto counts = arc_count_report(set);
    set.write_csv(art.path("arcs.csv").string());
    {
        std::ofstream f(art.path("critical_points.csv"));
        f << "x,y,grad,value\n" << std::setprecision(17);
        for (const auto& c : cps) f << c.p[0] << "," << c.p[1] << "," << c.grad_after_polish << "," << c.value << "\n";
    }
    rep["critical_points"] = cps.size();
    rep["arcs"] = set.arcs.size();
    rep["counts"] = json::parse(counts.to_json());
    rep["verdict"] = to_string(counts.verdict);
    art.text("report.json", rep.dump(2));
    art.write_manifest(echo(o, "diff"));
    std::cout << rep.dump(2) << "\n";
    return 0;
}

// Runs are "seed:h:B" entries separated by commas.
std::vector<ProbeRun> parse_runs(const std::string& s) {
    std::vector<ProbeRun> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::stringstream is(item);
        std::string seed, h, B;
        std::getline(is, seed, ':');
        std::getline(is, h, ':');
        std::getline(is, B, ':');
        ProbeRun r;
        if (seed == "capped-harmonic") r.seed = Seed::capped_harmonic;
        else if (seed != "zero") throw UsageError("probe seed must be zero or capped-harmonic");
        r.h = h.empty() ? 0 : parse_real(h);
        r.B = B.empty() ? 12 : parse_real(B);
        out.push_back(r);
    }
    return out;
}

int cmd_probe(const Options& o) {
    const auto runs = parse_runs(o.runs.empty() ? "zero,capped-harmonic" : o.runs);
    if (runs.size() < 2) throw UsageError("a probe needs at least two runs");
    const SurfaceKind k = surface_from(o);
    Artifacts art(o.out);
    const auto rep = uniqueness_probe(k, runs, piece_config(o));
    const json j = json::parse(rep.to_json());
    art.text("report.json", j.dump(2));
    art.write_manifest(echo(o, "probe"));
    std::cout << j.dump(2) << "\n";
    return rep.partial ? 3 : 0;
}

int cmd_limits(const Options& o) {
    const auto widths = parse_list(o.widths);
    if (widths.size() < 2) throw UsageError("limits needs at least two widths");
    PieceConfig c = piece_config(o);
    Artifacts art(o.out);
    // Independent widths fan out over --jobs workers; results keep list order.
    std::vector<LimitReport::Entry> entries(widths.size());
    const int jobs = std::max(1, o.jobs);
    for (std::size_t k0 = 0; k0 < widths.size(); k0 += jobs) {
        std::vector<std::future<LimitReport>> fut;
        for (std::size_t k = k0; k < std::min(widths.size(), k0 + jobs); ++k)
            fut.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                     [&, k] { return rescaled_helicoid_limit_check({widths[k]}, c); }));
        for (std::size_t k = 0; k < fut.size(); ++k) entries[k0 + k] = fut[k].get().entries.front();
    }
    LimitReport rep;
    rep.entries = entries;
    rep.strictly_decreasing = true;
    for (std::size_t k = 1; k < entries.size(); ++k)
        rep.strictly_decreasing = rep.strictly_decreasing && entries[k].sup_H < entries[k - 1].sup_H;
    const json j = json::parse(rep.to_json());
    art.text("report.json", j.dump(2));
    art.write_manifest(echo(o, "limits"));
    std::cout << j.dump(2) << "\n";
    return 0;
}

void surface_options(CLI::App* c, Options& o) {
    c->add_option("--surface", o.surface, "grim-reaper, tilted-grim-reaper, pitchfork, helicoid, scherk, scherkenoid, trident");
    c->add_option("--w", o.w, "strip width; accepts pi, pi/2, sqrt2*pi");
    c->add_option("--h", o.h, "mesh size");
    c->add_option("--xmin", o.x_min, "left truncation");
    c->add_option("--xmax", o.x_max, "right truncation");
    c->add_option("--x-hat", o.x_hat, "helicoid axis abscissa");
    c->add_option("--alpha", o.alpha, "parallelogram angle");
    c->add_option("--L", o.L, "scherk base length");
    c->add_option("--a", o.a, "trident neck size");
    c->add_option("--b", o.b, "trident strip width");
    c->add_option("--caps", o.caps, "cap schedule, comma separated");
    c->add_option("--init", o.init_seed, "initial guess: zero or capped-harmonic");
    c->add_flag("--calibrate", o.calibrate, "calibrate x_hat, L or b");
    c->add_option("--newton-tol", o.newton_tol, "Newton residual tolerance");
    c->add_option("--max-newton-iters", o.max_newton_iters, "Newton iterations per cap stage");
    c->add_option("--linear-solver", o.linear_solver, "banded or iterative");
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    // The config file supplies defaults; explicit flags override it.
    for (int k = 1; k + 1 < argc; ++k)
        if (std::string(argv[k]) == "--config") {
            try {
                load_config(argv[k + 1], o);
            } catch (const std::exception& e) {
                std::cerr << "usage error: " << e.what() << "\n";
                return 2;
            }
        }

    CLI::App app{"Translating graph solver and uniqueness diagnostics"};
    app.set_help_flag("--help", "print help");  // -h would shadow --h
    app.require_subcommand(1);
    app.add_option("--config", o.config, "JSON config; flags override its values");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--seed", o.seed, "random seed for sampled checks");
    app.add_option("--jobs", o.jobs, "parallel workers for sweeps");
    app.add_flag("-v,--verbose", o.verbose, "print solver progress to stderr");

    auto* solve = app.add_subcommand("solve", "construct a surface piece");
    surface_options(solve, o);
    solve->add_flag("--obj", o.obj, "export the reflected surface as OBJ");
    solve->add_option("--copies", o.copies, "reflection copies for OBJ export");

    std::string check_what;
    auto* check = app.add_subcommand("check", "geometric checks on a field");
    check->add_option("what", check_what, "gauss, theta, slope or delta")->required();
    surface_options(check, o);
    check->add_option("--field", o.field, "field CSV");
    check->add_option("--domain", o.domain, "domain JSON of the field");
    check->add_option("--axis-x", o.axis_x, "rotation axis x");
    check->add_option("--axis-y", o.axis_y, "rotation axis y");
    check->add_option("--R", o.R, "exclusion radius");
    check->add_option("--side", o.side, "region side: -1 or +1");
    check->add_option("--direction", o.direction, "slope scan direction");
    check->add_option("--eps-target", o.eps_target, "target slope ratio");
    check->add_option("--samples", o.samples, "sample pairs for the gauss check");

    auto* diff = app.add_subcommand("diff", "difference-field critical points and arcs");
    surface_options(diff, o);
    diff->add_option("--fixture", o.fixture, "analytic fixture: saddle, monkey, line, circle, tail");
    diff->add_option("--u1", o.u1, "first field CSV");
    diff->add_option("--u2", o.u2, "second field CSV");
    diff->add_option("--domain1", o.domain1, "domain JSON of the first field");
    diff->add_option("--domain2", o.domain2, "domain JSON of the second field");
    diff->add_option("--xi-x", o.xi_x, "horizontal shift of the second field");
    diff->add_option("--xi-y", o.xi_y, "y shift of the second field");

    auto* probe = app.add_subcommand("probe", "uniqueness probe over seeds and resolutions");
    surface_options(probe, o);
    probe->add_option("--runs", o.runs, "seed:h:B entries, comma separated");

    auto* limits = app.add_subcommand("limits", "rescaled helicoid curvature check");
    limits->add_option("--widths", o.widths, "descending widths");
    limits->add_option("--h", o.h, "mesh size (default w/32)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*solve) return cmd_solve(o);
        if (*check) return cmd_check(check_what, o);
        if (*diff) return cmd_diff(o);
        if (*probe) return cmd_probe(o);
        if (*limits) return cmd_limits(o);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

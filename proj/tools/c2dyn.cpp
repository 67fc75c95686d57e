#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <c2dyn/c2dyn.hpp>

using namespace c2dyn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNonRegular = 3, kSamples = 4, kNumeric = 5 };

struct Common {
    std::string map_path;
    std::string builtin;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    unsigned threads = 0;
    bool force = false;
};

MapSpec load_map(const Common& c) {
    if (!c.builtin.empty()) {
        if (c.builtin == "squares") return maps::product_quadratic(0.0, 0.0, "squares");
        if (c.builtin == "swap") return maps::swap_squares();
        if (c.builtin == "basilica_skew") return maps::basilica_skew();
        throw Error(ErrorCode::Config, "unknown builtin map '" + c.builtin + "'");
    }
    if (c.map_path.empty()) throw Error(ErrorCode::Config, "--map or --builtin is required");
    return load_map_config(c.map_path);
}

std::uint64_t need_seed(const Common& c) {
    if (!c.seed) throw Error(ErrorCode::Config, "--seed is required for this command");
    return *c.seed;
}

fs::path out_file(const Common& c, const std::string& name) {
    fs::path dir(c.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Config, "cannot create output directory '" + c.out + "'");
    fs::path p = dir / name;
    if (fs::exists(p) && !c.force) throw Error(ErrorCode::Config, "'" + p.string() + "' exists (use --force)");
    return p;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream o(p, std::ios::binary);
    if (!o) throw Error(ErrorCode::Config, "cannot write '" + p.string() + "'");
    o << s;
}

json map_json(const MapSpec& f) { return {{"label", f.label()}, {"degree", f.degree()}, {"config", format_map_config(f)}}; }

cplx parse_complex(const std::string& s) {
    auto comma = s.find(',');
    try {
        if (comma == std::string::npos) return {std::stod(s), 0.0};
        return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    } catch (const std::exception&) {
        throw Error(ErrorCode::Config, "bad complex number '" + s + "' (use re or re,im)");
    }
}

int exit_code(ErrorCode c) {
    switch (c) {
    case ErrorCode::Config:
    case ErrorCode::LoopNotClosed: return kConfig;
    case ErrorCode::NonRegularMap: return kNonRegular;
    case ErrorCode::EmptySampleSet:
    case ErrorCode::InsufficientPairs: return kSamples;
    default: return kNumeric;
    }
}

// ---------------------------------------------------------------------------

struct GreenArgs {
    std::string points;
    std::vector<std::string> point;
    std::string z = "2";
    double half_width = 2.0;
    int grid = 0;
    int budget = 1000;
};

int cmd_green(const Common& c, const GreenArgs& a) {
    MapSpec f = load_map(c);
    require_regular(f);
    std::vector<Vec2> pts;
    for (const auto& s : a.point) {
        std::vector<double> v;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
        if (v.size() != 4) throw Error(ErrorCode::Config, "--point wants re1,im1,re2,im2");
        pts.push_back(make_vec(cplx(v[0], v[1]), cplx(v[2], v[3])));
    }
    if (!a.points.empty()) {
        std::ifstream in(a.points);
        if (!in) throw Error(ErrorCode::Config, "cannot open '" + a.points + "'");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
            double v[4];
            if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3]) != 4)
                throw Error(ErrorCode::Config, "bad point line '" + line + "'");
            pts.push_back(make_vec(cplx(v[0], v[1]), cplx(v[2], v[3])));
        }
    }
    if (a.grid > 0) {
        SliceSpec s = slice_z_equals(parse_complex(a.z), a.half_width, a.grid);
        s.validate();
        for (int i = 0; i < a.grid; ++i)
            for (int j = 0; j < a.grid; ++j) pts.push_back(s.point(i, j));
    }
    if (pts.empty()) throw Error(ErrorCode::Config, "no points (use --point, --points or --grid)");
    EscapeData e = escape_data(f);
    std::vector<GreenValue> g(pts.size());
    parallel_for(pts.size(), c.threads, [&](std::size_t i) { g[i] = green(f, e, pts[i], a.budget); });
    std::ostringstream os;
    os << "re1,im1,re2,im2,G,error_bound,iterations,escaped\n";
    char buf[320];
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec2& p = pts[i];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.6g,%d,%d\n", p(0).real(), p(0).imag(), p(1).real(),
                      p(1).imag(), g[i].value, g[i].error_bound, g[i].iterations, g[i].escaped ? 1 : 0);
        os << buf;
    }
    write_text(out_file(c, "green.csv"), os.str());
    return kOk;
}

// ---------------------------------------------------------------------------

struct LyapunovArgs {
    std::size_t n_mu = 100000, n_mu_pi = 100000;
    double muc_tol = 5e-4;
};

int cmd_lyapunov(const Common& c, const LyapunovArgs& a) {
    MapSpec f = load_map(c);
    LyapunovConfig cfg;
    cfg.seed = need_seed(c);
    cfg.n_mu = a.n_mu;
    cfg.n_mu_pi = a.n_mu_pi;
    cfg.sampler.threads = c.threads;
    cfg.mu_c.tol = a.muc_tol;
    cfg.mu_c.threads = c.threads;
    if (a.n_mu == 0 || a.n_mu_pi == 0) throw Error(ErrorCode::EmptySampleSet, "sample counts must be positive");
    LyapunovReport r = exponent_identity_residual(f, cfg);
    json j = {{"map", map_json(f)},
              {"seed", cfg.seed},
              {"lambda_f", r.lambda_f},
              {"stderr_lambda_f", r.stderr_lambda_f},
              {"lambda_pi", r.lambda_pi},
              {"stderr_lambda_pi", r.stderr_lambda_pi},
              {"int_G_mu_c", r.int_G_muc},
              {"quadrature_error_mu_c", r.stderr_int_G_muc},
              {"mu_c_mass", r.mu_c_mass},
              {"mu_c_cells", r.mu_c_cells},
              {"log_d", r.log_d},
              {"residual", r.residual},
              {"band", r.band},
              {"within_band", r.within_band()},
              {"n_mu", r.n_mu},
              {"n_mu_pi", r.n_mu_pi},
              {"mu_c_tol", a.muc_tol}};
    write_text(out_file(c, "lyapunov.json"), j.dump(2) + "\n");
    return kOk;
}

// ---------------------------------------------------------------------------

struct RaysArgs {
    std::size_t n_rays = 1000;
    double r_min = 1e-7;
    double tail_tol = 1e-5;
    int substeps = 8;
    std::size_t traces = 4;
};

int cmd_rays(const Common& c, const RaysArgs& a) {
    MapSpec f = load_map(c);
    require_regular(f);
    const std::uint64_t seed = need_seed(c);
    if (!(a.r_min > 0.0)) throw Error(ErrorCode::Config, "--r-min must be positive");
    ModelData md = make_model(f, 2000, seed);
    TransportOptions opt;
    opt.ray.r_min = a.r_min;
    opt.ray.substeps = a.substeps;
    opt.tail_tol = a.tail_tol;
    opt.threads = c.threads;
    auto mu_pi = sample_mu_pi(f, opt.n_mu_pi, seed ^ 0xB5ULL);
    auto rays = sample_nu(mu_pi, std::min(a.traces, a.n_rays), seed);
    std::ostringstream tr;
    tr << "ray,base_re1,base_im1,base_re2,base_im2,theta,r,re1,im1,re2,im2,status\n";
    char buf[400];
    for (std::size_t i = 0; i < rays.size(); ++i) {
        RayTrace t = trace_ray(f, md, rays[i], opt.ray);
        const Vec2& b = rays[i].base.rep();
        for (const auto& n : t.nodes) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s\n", i, b(0).real(),
                          b(0).imag(), b(1).real(), b(1).imag(), rays[i].theta, n.r, n.x(0).real(), n.x(0).imag(), n.x(1).real(),
                          n.x(1).imag(), to_string(t.status));
            tr << buf;
        }
    }
    json j = {{"map", map_json(f)}, {"seed", seed}, {"n_rays", a.n_rays}, {"r_min", a.r_min}, {"tail_tol", a.tail_tol}};
    TransportReport rep;
    try {
        rep = pushforward_check(f, md, a.n_rays, seed, opt);
        j["energy_distance"] = rep.energy;
    } catch (const Error& e) {
        // nothing landed: still a valid run, the statistic is just absent
        if (e.code() != ErrorCode::EmptySampleSet || a.n_rays == 0) throw;
        j["energy_distance"] = nullptr;
    }
    j["landed"] = rep.landed;
    j["obstructed"] = rep.obstructed;
    j["unresolved_fraction"] = rep.rays ? rep.unresolved_fraction : 1.0;
    std::ostringstream ld;
    write_landings_csv(ld, rep.landings, seed);
    auto p1 = out_file(c, "traces.csv"), p2 = out_file(c, "landings.csv"), p3 = out_file(c, "transport.json");
    write_text(p1, tr.str());
    write_text(p2, ld.str());
    write_text(p3, j.dump(2) + "\n");
    return kOk;
}

// ---------------------------------------------------------------------------

struct RenderArgs {
    std::vector<std::string> z{"2", "1.3", "1.2", "1.15", "1.1"};
    std::string center = "0";
    double half_width = 3.0;
    int resolution = 512;
    int budget = 500;
    int direction_budget = 16;
    double capture = 1e-3;
    bool heatmap = false;
    bool png = false;
};

int cmd_render(const Common& c, const RenderArgs& a) {
    MapSpec f = load_map(c);
    require_regular(f);
    if (a.resolution <= 0 || a.resolution > 8192) throw Error(ErrorCode::Config, "--resolution must be in [1, 8192]");
    if (a.png && !png_available()) throw Error(ErrorCode::Config, "built without PNG support");
    for (std::size_t i = 0; i < a.z.size(); ++i) {
        cplx zc = parse_complex(a.z[i]);
        SliceSpec s = slice_z_equals(zc, a.half_width, a.resolution, parse_complex(a.center));
        s.classify.budget = a.budget;
        s.classify.direction_budget = a.direction_budget;
        s.classify.capture = a.capture;
        Image img = a.heatmap ? green_heatmap(f, s, a.budget, c.threads) : slice_render(f, s, c.threads);
        std::string stem = (a.heatmap ? "green_" : "slice_") + std::to_string(i);
        auto img_path = out_file(c, stem + (a.png ? ".png" : ".pgm"));
        auto meta_path = out_file(c, stem + ".json");
        if (a.png) write_png(img_path.string(), img);
        else write_pgm(img_path.string(), img);
        json m = {{"map", map_json(f)},
                  {"kind", a.heatmap ? "green" : "classes"},
                  {"line", {{"z_re", zc.real()}, {"z_im", zc.imag()}}},
                  {"center", {s.center.real(), s.center.imag()}},
                  {"half_width", a.half_width},
                  {"resolution", a.resolution},
                  {"budget", a.budget},
                  {"direction_budget", a.direction_budget},
                  {"capture_radius", a.capture},
                  {"maxval", img.maxval}};
        if (!a.heatmap)
            m["pixel_values"] = {{"bounded", kPixelBounded}, {"near_J_pi", kPixelNearJPi}, {"attractor_base", pixel_for_cycle(0)}};
        write_text(meta_path, m.dump(2) + "\n");
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct ModelArgs {
    std::size_t samples = 1000;
    int m = 40;
    int loop = 720;
    std::size_t psi_samples = 20;
    int depth = 12;
    int tau_steps = 16;
    bool determinant = false;
};

int cmd_model(const Common& c, const ModelArgs& a) {
    MapSpec f = load_map(c);
    require_regular(f);
    const std::uint64_t seed = need_seed(c);
    ModelData md = make_model(f, a.samples, seed, a.determinant ? SectionRoute::Determinant : SectionRoute::Linear);
    json j = {{"map", map_json(f)}, {"seed", seed}, {"route", a.determinant ? "determinant" : "linear"}, {"N", md.N}};
    j["a0"] = {md.a0.rep()(0).real(), md.a0.rep()(0).imag(), md.a0.rep()(1).real(), md.a0.rep()(1).imag()};
    double worst = 0.0;
    json alpha_table = json::array();
    for (std::size_t i = 0; i < md.jpi.size(); ++i) {
        const auto& p = md.jpi[i];
        try {
            worst = std::max(worst, alpha_conjugacy_residual(f, md, p, a.m));
            if (i < 32) {
                AlphaValue al = alpha(f, md, p, a.m);
                alpha_table.push_back({{"zeta_re", p.zeta().real()}, {"zeta_im", p.zeta().imag()}, {"alpha", al.value},
                                       {"error_bound", al.error_bound}});
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SectionPole) throw;
        }
    }
    j["alpha_terms"] = a.m;
    j["alpha_table"] = alpha_table;
    j["max_alpha_residual"] = worst;
    try {
        j["winding_unit_circle"] = winding_number_eta(f, md, unit_circle_loop(a.loop));
    } catch (const Error& e) {
        j["winding_unit_circle"] = nullptr;
        j["winding_error"] = e.what();
    }
    auto cyc = attracting_cycles(induced_pi(f));
    j["hyperbolic_heuristic"] = cyc.hyperbolic;
    EscapeData e = escape_data(f);
    const double R0 = model_level(e);
    double conj = 0.0, gres = 0.0, inc = 0.0;
    std::size_t obstructed = 0, done = 0;
    Philox rng(seed, 0x51);
    for (std::size_t i = 0; i < a.psi_samples && !md.jpi.empty(); ++i) {
        Vec2 u = md.jpi[static_cast<std::size_t>(rng.below(md.jpi.size()))].rep();
        double lam = std::exp(R0 + 0.5 - green_h(f, e, u).value);
        Vec2 x = u * std::polar(lam, rng.uniform(0.0, kTwoPi));
        try {
            PsiResult p = psi(f, x, a.depth, a.tau_steps);
            PsiResult q = psi(f, f.eval_top(x), a.depth, a.tau_steps);
            conj = std::max(conj, norm(f.eval(p.value) - q.value) / (1.0 + norm(q.value)));
            gres = std::max(gres, std::abs(green(f, e, p.value).value - green_h(f, e, x).value));
            inc = std::max(inc, p.increment);
            ++done;
        } catch (const Error& er) {
            if (er.code() != ErrorCode::NearCriticalValue) throw;
            ++obstructed;
        }
    }
    j["psi"] = {{"level", R0 + 0.5}, {"depth", a.depth}, {"tau_steps", a.tau_steps}, {"samples", done}, {"obstructed", obstructed},
                {"max_conjugacy_residual", conj}, {"max_green_residual", gres}, {"max_cauchy_increment", inc}};
    write_text(out_file(c, "model.json"), j.dump(2) + "\n");
    return kOk;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--map", c.map_path, "map config file");
    sub->add_option("--builtin", c.builtin, "squares | swap | basilica_skew");
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--threads", c.threads, "worker threads (0 = all cores)");
    sub->add_flag("--force", c.force, "overwrite existing outputs");
}

void write_diagnostic(const Common& c, const Error& e) {
    json j = {{"error", to_string(e.code())}, {"message", e.what()}};
    if (std::isfinite(e.param())) j["param"] = e.param();
    try {
        fs::create_directories(c.out);
        std::ofstream(fs::path(c.out) / "error.json") << j.dump(2) << "\n";
    } catch (...) {
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"c2dyn: dynamics of regular polynomial maps of C^2"};
    app.require_subcommand(1);
    Common common;

    GreenArgs ga;
    auto* g = app.add_subcommand("green", "evaluate G on points or a slice grid");
    add_common(g, common);
    g->add_option("--points", ga.points, "CSV file re1,im1,re2,im2");
    g->add_option("--point", ga.point, "single point re1,im1,re2,im2");
    g->add_option("--grid", ga.grid, "grid size on the line {z = --z}");
    g->add_option("--z", ga.z, "line {z = c}, c as re or re,im");
    g->add_option("--half-width", ga.half_width, "grid half-width in w");
    g->add_option("--budget", ga.budget, "iteration budget");

    LyapunovArgs la;
    auto* l = app.add_subcommand("lyapunov", "Lyapunov identity residual");
    add_common(l, common);
    l->add_option("--n-mu", la.n_mu, "samples of mu");
    l->add_option("--n-mu-pi", la.n_mu_pi, "samples of mu_Pi");
    l->add_option("--muc-tol", la.muc_tol, "mu_c quadrature tolerance");

    RaysArgs ra;
    auto* r = app.add_subcommand("rays", "external rays and landing transport");
    add_common(r, common);
    r->add_option("--n-rays", ra.n_rays, "rays for the transport check");
    r->add_option("--r-min", ra.r_min, "lowest level");
    r->add_option("--tail-tol", ra.tail_tol, "landing tail diameter");
    r->add_option("--substeps", ra.substeps, "nodes per factor d in r");
    r->add_option("--traces", ra.traces, "number of full traces written");

    RenderArgs rn;
    auto* rd = app.add_subcommand("render", "slice pictures on lines {z = c}");
    add_common(rd, common);
    rd->add_option("--z", rn.z, "one or more line values c (re or re,im)");
    rd->add_option("--center", rn.center, "window centre in w");
    rd->add_option("--half-width", rn.half_width, "window half-width");
    rd->add_option("--resolution", rn.resolution, "pixels per side");
    rd->add_option("--budget", rn.budget, "escape budget");
    rd->add_option("--direction-budget", rn.direction_budget, "capture deadline for directions");
    rd->add_option("--capture", rn.capture, "capture radius (chordal)");
    rd->add_flag("--heatmap", rn.heatmap, "16-bit Green image instead of classes");
    rd->add_flag("--png", rn.png, "PNG instead of PGM");

    ModelArgs ma;
    auto* m = app.add_subcommand("model", "normal form and Psi report");
    add_common(m, common);
    m->add_option("--samples", ma.samples, "J_Pi samples");
    m->add_option("--alpha-terms", ma.m, "alpha truncation");
    m->add_option("--loop", ma.loop, "points on the unit-circle loop");
    m->add_option("--psi-samples", ma.psi_samples, "cone points for Psi");
    m->add_option("--depth", ma.depth, "Psi depth");
    m->add_option("--tau-steps", ma.tau_steps, "tau continuation steps");
    m->add_flag("--determinant", ma.determinant, "use g = det Df_h");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kConfig;
    }

    try {
        if (*g) return cmd_green(common, ga);
        if (*l) return cmd_lyapunov(common, la);
        if (*r) return cmd_rays(common, ra);
        if (*rd) return cmd_render(common, rn);
        if (*m) return cmd_model(common, ma);
    } catch (const Error& e) {
        std::cerr << "c2dyn: " << e.what() << "\n";
        int rc = exit_code(e.code());
        if (rc == kNumeric) write_diagnostic(common, e);
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "c2dyn: " << e.what() << "\n";
        return kConfig;
    }
    return kConfig;
}

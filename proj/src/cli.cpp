#include "qnet/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qnet/network.hpp"
#include "qnet/noise.hpp"
#include "qnet/rng.hpp"

namespace qnet {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::size_t kMaxListedTraces = 20;
// Largest |D> (in terms) that the protocol command builds for the isolated
// step-3 check.
constexpr double kStep3TermLimit = 3e5;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

ojson nullable(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

struct Global {
    std::uint64_t seed = 0;
    std::string out;
    std::string format;
    unsigned threads = 0;
};

struct SweepArgs {
    std::string pattern = "triangle";
    std::vector<int> Ns{64, 128, 256, 512};
    double z_min = -2.0;
    double z_max = 0.0;
    double z_step = 0.05;
    int trials = 200;
    double c_coeff = 1.0;
};

struct PmArgs {
    int N = 10000;
    double z = -2.0;
    double c_coeff = 3.0;
    int samples = 400;
    int m_max = 5;
};

struct ProtocolArgs {
    std::string target = "edge";
    std::string mode = "exact";
    int runs = 100;
    bool no_phase_correction = false;
    bool include_state = false;
    double eps_fail = 1e-3;
    std::uint64_t network_N = 10000;
    int harvest_N = 10000;
};

struct NoiseArgs {
    std::string target = "edge";
    double eps = 0.0;
    std::string mode = "exact";
    int runs = 1000;
    double eps_fail = 1e-3;
};

void require(bool ok, const std::string& message) {
    if (!ok) throw UsageError(message);
}

SubgraphPattern parse_pattern(const std::string& name) {
    try {
        return pattern_by_name(name);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

Mode parse_mode(const std::string& m) { return m == "sampled" ? Mode::sampled : Mode::exact; }

struct Output {
    std::string content;
    ojson config;
};

Output run_sweep(const SweepArgs& a, const Global& g, const std::string& format) {
    require(!a.Ns.empty(), "sweep: --n-list is empty");
    for (int N : a.Ns) require(N >= 2 && N <= (1 << 20), "sweep: N must lie in [2, 2^20]");
    require(a.z_step > 0.0 && a.z_max >= a.z_min, "sweep: need z-step > 0 and z-max >= z-min");
    require(a.z_min >= -10.0 && a.z_max <= 1.0, "sweep: z range must lie in [-10, 1]");
    require(a.trials >= 1, "sweep: trials must be >= 1");
    require(a.c_coeff > 0.0, "sweep: c-coeff must be > 0");
    const SubgraphPattern f = parse_pattern(a.pattern);
    require(f.l() >= 1, "sweep: pattern needs at least one edge");
    const auto zs = z_grid(a.z_min, a.z_max, a.z_step);
    require(zs.size() <= 100000, "sweep: z grid too large");

    SweepConfig cfg;
    cfg.Ns = a.Ns;
    cfg.zs = zs;
    cfg.c_coeff = a.c_coeff;
    cfg.trials = a.trials;
    cfg.seed = g.seed;
    cfg.threads = resolve_threads(g.threads);
    const SweepResult r = threshold_sweep(f, cfg);

    Output out;
    out.content = format == "json" ? to_json(r).dump(2) + "\n" : sweep_csv(r);
    out.config = {{"pattern", a.pattern}, {"n_list", a.Ns},   {"z_min", a.z_min},     {"z_max", a.z_max},
                  {"z_step", a.z_step},   {"trials", a.trials}, {"c_coeff", a.c_coeff}};
    return out;
}

Output run_pm(const PmArgs& a, const Global& g, const std::string& format) {
    require(a.N >= 2 && a.N <= 200000, "pm-dist: N must lie in [2, 200000]");
    require(a.c_coeff > 0.0, "pm-dist: c-coeff must be > 0");
    require(a.samples >= 1, "pm-dist: samples must be >= 1");
    require(a.m_max >= 0 && a.m_max < a.N, "pm-dist: m-max must lie in [0, N-1]");
    const double p = 2.0 * a.c_coeff * std::pow(static_cast<double>(a.N), a.z);
    require(p <= 1.0, "pm-dist: p = 2 c N^z exceeds 1");
    const PmSummary s = summarize_pm(a.N, a.z, a.c_coeff, a.samples, a.m_max, g.seed, resolve_threads(g.threads));
    Output out;
    if (format == "json") {
        ojson j = to_json(s);
        j["vacuum_overlap"] = vacuum_overlap(a.N, s.p);
        j["vacuum_overlap_asymptotic"] = std::exp(-std::pow(static_cast<double>(a.N), 2.0) * s.p / 4.0);
        out.content = j.dump(2) + "\n";
    } else {
        out.content = pm_csv(s);
    }
    out.config = {{"N", a.N}, {"z", a.z}, {"c_coeff", a.c_coeff}, {"samples", a.samples}, {"m_max", a.m_max}};
    return out;
}

ojson target_header(const SubgraphTarget& t) {
    const Rational r = critical_exponent(t.pattern);
    ojson j;
    j["target"] = t.name();
    j["n"] = t.n;
    j["l"] = t.l;
    j["d"] = t.d;
    j["D"] = t.D;
    j["c"] = t.c_nodes;
    j["critical_exponent"] = std::to_string(r.num) + "/" + std::to_string(r.den);
    return j;
}

// Steps 3 and 4 run on their exact inputs even when the full chain is out of
// reach (odd or large c).
ojson isolated_checks(const SubgraphTarget& t) {
    ojson checks;
    std::vector<std::string> labels;
    for (int i = 0; i < t.n; ++i) labels.push_back(node_label(i));
    double terms = 1.0;
    for (int i = 0; i < t.n; ++i) terms *= static_cast<double>(t.D) - i;
    ojson s3;
    s3["feasible"] = t.D <= 65535 && terms <= kStep3TermLimit;
    if (s3["feasible"].get<bool>()) {
        const int d = static_cast<int>(t.d);
        const ExtractResult ex = step3_extract_ghz(ket_d(t.n, static_cast<int>(t.D), labels), t.n, d);
        s3["probability"] = ex.probability;
        s3["fidelity"] = ex.state ? fidelity(*ex.state, ghz_state(d, d, labels)) : 0.0;
    }
    checks["step3"] = s3;
    ojson s4;
    s4["feasible"] = t.d <= 4096;
    if (s4["feasible"].get<bool>()) {
        const int d = static_cast<int>(t.d);
        const ProjectResult pr = step4_project(ghz_state(d, d, labels), t.pattern);
        s4["probability"] = pr.probability;
        s4["fidelity"] = pr.state ? fidelity(*pr.state, target_state(t.pattern, labels)) : 0.0;
    }
    checks["step4"] = s4;
    return checks;
}

Output run_protocol_cmd(const ProtocolArgs& a, const Global& g, const std::string& format) {
    require(a.mode == "exact" || a.mode == "sampled", "protocol: mode must be exact or sampled");
    require(a.runs >= 1 && a.runs <= 1000000, "protocol: runs must lie in [1, 10^6]");
    require(a.eps_fail > 0.0 && a.eps_fail < 1.0, "protocol: eps-fail must lie in (0, 1)");
    require(a.network_N >= 1, "protocol: network-N must be >= 1");
    require(a.harvest_N >= 2, "protocol: harvest-N must be >= 2");
    const SubgraphPattern f = parse_pattern(a.target);
    require(f.l() >= 1 && f.l() <= 30, "protocol: target needs 1..30 edges");
    const SubgraphTarget t = make_target(f);

    ProtocolOptions o;
    o.mode = parse_mode(a.mode);
    o.seed = g.seed;
    o.phase_correction = !a.no_phase_correction;
    o.harvest_N = a.harvest_N;

    std::vector<ProtocolTrace> traces;
    if (o.mode == Mode::exact) traces.push_back(run_full_protocol(t, o));
    else traces = run_sampled_protocols(t, o, a.runs, resolve_threads(g.threads));

    Output out;
    out.config = {{"target", a.target},       {"mode", a.mode},           {"runs", a.runs},
                  {"phase_correction", !a.no_phase_correction}, {"eps_fail", a.eps_fail},
                  {"network_N", a.network_N}, {"harvest_N", a.harvest_N}};
    if (format == "csv") {
        out.content = traces_csv(traces);
        return out;
    }
    ojson j = target_header(t);
    j["mode"] = a.mode;
    const double p_F = traces.front().p_F;
    if (o.mode == Mode::exact) {
        j["trace"] = to_json(traces.front(), a.include_state);
    } else {
        std::size_t ok = 0;
        for (const auto& tr : traces) ok += tr.success ? 1 : 0;
        j["runs"] = a.runs;
        j["successes"] = ok;
        j["success_fraction"] = static_cast<double>(ok) / a.runs;
        j["p_F"] = p_F;
        j["traces"] = ojson::array();
        for (std::size_t i = 0; i < traces.size() && i < kMaxListedTraces; ++i) {
            j["traces"].push_back(to_json(traces[i], a.include_state));
        }
    }
    j["checks"] = isolated_checks(t);
    j["amplification"] = p_F > 0.0 ? to_json(amplification_plan(a.network_N, p_F, a.eps_fail)) : ojson(nullptr);
    out.content = j.dump(2) + "\n";
    return out;
}

Output run_noise_cmd(const NoiseArgs& a, const Global& g, const std::string& format) {
    require(a.mode == "exact" || a.mode == "sampled", "noise: mode must be exact or sampled");
    require(a.eps >= 0.0 && a.eps <= 1.0, "noise: eps must lie in [0, 1]");
    require(a.runs >= 1 && a.runs <= 10000000, "noise: runs must lie in [1, 10^7]");
    require(a.eps_fail > 0.0 && a.eps_fail < 1.0, "noise: eps-fail must lie in (0, 1)");
    const SubgraphPattern f = parse_pattern(a.target);
    require(f.l() >= 1 && f.l() <= 30, "noise: target needs 1..30 edges");
    const SubgraphTarget t = make_target(f);
    require(t.c_nodes % 2 == 0 && t.c_nodes <= static_cast<std::uint64_t>(kFullChainLimit),
            "noise: target " + a.target + " has c=" + std::to_string(t.c_nodes) +
                "; the noisy chain needs an even c <= " + std::to_string(kFullChainLimit));

    NoisyOptions o;
    o.mode = parse_mode(a.mode);
    o.seed = g.seed;
    o.runs = a.runs;
    o.threads = resolve_threads(g.threads);
    o.eps_fail = a.eps_fail;
    const NoisyReport r = run_protocol_noisy(t, a.eps, o);

    Output out;
    out.config = {{"target", a.target}, {"eps", a.eps}, {"mode", a.mode}, {"runs", a.runs}, {"eps_fail", a.eps_fail}};
    if (format == "csv") {
        out.content = "eps,x_theory,x_measured,retry_budget,pruned_mass\n" + num(r.eps) + "," + num(r.x_theory) + "," +
                      num(r.x_measured) + "," + (r.retry_budget ? std::to_string(*r.retry_budget) : "") + "," +
                      num(r.pruned_mass) + "\n";
    } else {
        out.content = to_json(r).dump(2) + "\n";
    }
    return out;
}

void write_manifest(const std::string& path, const std::string& subcommand, const Global& g, const std::string& format,
                    const ojson& config, const std::string& content, double seconds) {
    ojson m;
    m["tool"] = "qnetlab";
    m["version"] = kVersion;
    m["subcommand"] = subcommand;
    ojson cfg = config;
    cfg["seed"] = g.seed;
    cfg["format"] = format;
    cfg["threads"] = resolve_threads(g.threads);
    m["config"] = cfg;
    m["wall_clock_seconds"] = seconds;
    m["outputs"] = ojson::array({{{"path", g.out}, {"bytes", content.size()}, {"fnv1a64", digest_hex(content)}}});
    emit_plotdata(m.dump(2) + "\n", path);
}

}  // namespace

PmSummary summarize_pm(int N, double z, double c_coeff, int samples, int m_max, std::uint64_t seed,
                       unsigned threads) {
    if (samples < 1 || m_max < 0) {
        throw std::invalid_argument("summarize_pm: need samples >= 1 and m_max >= 0");
    }
    std::vector<OutcomeStats> stats(static_cast<std::size_t>(samples));
    parallel_for(stats.size(), threads, [&](std::size_t i) {
        stats[i] = sample_pm_outcomes_scaled(N, z, c_coeff, derive_seed(seed, "pm-dist", i));
    });
    PmSummary s;
    s.N = N;
    s.z = z;
    s.c_coeff = c_coeff;
    s.p = 2.0 * c_coeff * std::pow(static_cast<double>(N), z);
    s.samples = samples;
    for (int m = 0; m <= m_max; ++m) {
        PmRow row;
        row.m = m;
        double sum = 0.0, sum2 = 0.0;
        for (const auto& st : stats) {
            const auto x = static_cast<double>(st.count(m));
            sum += x;
            sum2 += x * x;
        }
        row.mean = sum / samples;
        row.std = samples > 1 ? std::sqrt(std::max(0.0, (sum2 - samples * row.mean * row.mean) / (samples - 1))) : 0.0;
        const OutcomeExpectation e = expected_outcome_count(N, z, c_coeff, m);
        row.expected = e.exact;
        row.expected_asymptotic = e.asymptotic;
        s.rows.push_back(row);
    }
    return s;
}

std::string sweep_csv(const SweepResult& r) {
    std::string out = "N,z,p,trials,hits,fraction\n";
    for (const auto& row : r.rows) {
        out += std::to_string(row.N) + "," + num(row.z) + "," + num(row.p) + "," + std::to_string(row.trials) + "," +
               std::to_string(row.hits) + "," + num(row.fraction) + "\n";
    }
    return out;
}

std::string pm_csv(const PmSummary& s) {
    std::string out = "m,mean,std,expected,expected_asymptotic\n";
    for (const auto& row : s.rows) {
        out += std::to_string(row.m) + "," + num(row.mean) + "," + num(row.std) + "," + num(row.expected) + "," +
               num(row.expected_asymptotic) + "\n";
    }
    return out;
}

std::string traces_csv(const std::vector<ProtocolTrace>& traces) {
    std::string out = "run,success,p_F,fidelity\n";
    for (std::size_t i = 0; i < traces.size(); ++i) {
        out += std::to_string(i) + "," + (traces[i].success ? "1" : "0") + "," + num(traces[i].p_F) + "," +
               num(traces[i].fidelity) + "\n";
    }
    return out;
}

nlohmann::ordered_json to_json(const SweepResult& r) {
    ojson j;
    const Rational ce = critical_exponent(r.pattern);
    j["pattern"] = r.pattern.name;
    j["n"] = r.pattern.n;
    j["l"] = r.pattern.l();
    j["critical_exponent"] = ce.value();
    j["c_coeff"] = r.c_coeff;
    j["rows"] = ojson::array();
    std::vector<int> Ns;
    for (const auto& row : r.rows) {
        j["rows"].push_back({{"N", row.N},
                             {"z", row.z},
                             {"p", row.p},
                             {"trials", row.trials},
                             {"hits", row.hits},
                             {"fraction", row.fraction}});
        if (std::find(Ns.begin(), Ns.end(), row.N) == Ns.end()) Ns.push_back(row.N);
    }
    j["crossings"] = ojson::array();
    for (int N : Ns) {
        const auto rows = r.rows_for(N);
        j["crossings"].push_back({{"N", N}, {"z_half", nullable(estimate_crossing(rows))}});
    }
    return j;
}

nlohmann::ordered_json to_json(const PmSummary& s) {
    ojson j;
    j["N"] = s.N;
    j["z"] = s.z;
    j["c_coeff"] = s.c_coeff;
    j["p"] = s.p;
    j["samples"] = s.samples;
    j["rows"] = ojson::array();
    for (const auto& row : s.rows) {
        j["rows"].push_back({{"m", row.m},
                             {"mean", row.mean},
                             {"std", row.std},
                             {"expected", row.expected},
                             {"expected_asymptotic", row.expected_asymptotic}});
    }
    return j;
}

void emit_plotdata(const std::string& content, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.close();
    if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

std::string digest_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_id(bytes)));
    return buf;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"qnetlab: random-graph thresholds and LOCC subgraph extraction on quantum random graphs"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kVersion);

    Global g;
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--out", g.out, "output file (stdout when absent)");
    app.add_option("--format", g.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--threads", g.threads, "worker threads (default: QNETLAB_THREADS or 1)");

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "subgraph appearance fractions over an (N, z) grid");
    sweep->add_option("--pattern", sw.pattern, "edge, path3, path4, triangle, square, k4 or custom:a-b,...");
    sweep->add_option("--n-list", sw.Ns, "comma-separated N values")->delimiter(',');
    sweep->add_option("--z-min", sw.z_min);
    sweep->add_option("--z-max", sw.z_max);
    sweep->add_option("--z-step", sw.z_step);
    sweep->add_option("--trials", sw.trials);
    sweep->add_option("--c-coeff", sw.c_coeff, "p = c N^z");

    PmArgs pm;
    auto* pmd = app.add_subcommand("pm-dist", "P_m outcome counts against their expectation");
    pmd->add_option("--N", pm.N);
    pmd->add_option("--z", pm.z);
    pmd->add_option("--c-coeff", pm.c_coeff, "p = 2 c N^z");
    pmd->add_option("--samples", pm.samples);
    pmd->add_option("--m-max", pm.m_max);

    ProtocolArgs pr;
    auto* proto = app.add_subcommand("protocol", "run the extraction protocol for a target subgraph");
    proto->add_option("--target", pr.target);
    proto->add_option("--mode", pr.mode)->check(CLI::IsMember({"exact", "sampled"}));
    proto->add_option("--runs", pr.runs, "sampled runs");
    proto->add_flag("--no-phase-correction", pr.no_phase_correction);
    proto->add_flag("--include-state", pr.include_state, "dump final states");
    proto->add_option("--eps-fail", pr.eps_fail, "failure budget for the amplification plan");
    proto->add_option("--network-N", pr.network_N, "network size for the amplification plan");
    proto->add_option("--harvest-N", pr.harvest_N, "network size sampled in the harvest step");

    NoiseArgs nz;
    auto* noise = app.add_subcommand("noise", "mixed-link source with vacuum probability eps");
    noise->add_option("--target", nz.target);
    noise->add_option("--eps", nz.eps)->required();
    noise->add_option("--mode", nz.mode)->check(CLI::IsMember({"exact", "sampled"}));
    noise->add_option("--runs", nz.runs, "sampled ensemble draws");
    noise->add_option("--eps-fail", nz.eps_fail);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    const auto started = std::chrono::steady_clock::now();
    std::string name;
    try {
        Output result;
        std::string format = g.format;
        if (sweep->parsed()) {
            name = "sweep";
            if (format.empty()) format = "csv";
            result = run_sweep(sw, g, format);
        } else if (pmd->parsed()) {
            name = "pm-dist";
            if (format.empty()) format = "csv";
            result = run_pm(pm, g, format);
        } else if (proto->parsed()) {
            name = "protocol";
            if (format.empty()) format = "json";
            result = run_protocol_cmd(pr, g, format);
        } else {
            name = "noise";
            if (format.empty()) format = "json";
            result = run_noise_cmd(nz, g, format);
        }
        if (g.out.empty()) {
            out << result.content;
        } else {
            emit_plotdata(result.content, g.out);
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            write_manifest(g.out + ".manifest.json", name, g, format, result.config, result.content, seconds);
        }
        return 0;
    } catch (const std::invalid_argument& e) {
        err << "qnetlab " << name << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "qnetlab " << name << ": internal failure: " << e.what() << "\n";
        return 1;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace qnet

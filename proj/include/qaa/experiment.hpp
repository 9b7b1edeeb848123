#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qaa/dimacs.hpp"
#include "qaa/format.hpp"
#include "qaa/hamiltonian.hpp"
#include "qaa/perturbation.hpp"
#include "qaa/qmc.hpp"
#include "qaa/rng.hpp"
#include "qaa/sat_instance.hpp"
#include "qaa/spectrum.hpp"

namespace qaa {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON forms of the reports and coefficient files

inline json to_json(const PerturbationReport& r)
{
    json j;
    j["lower_plant"] = r.lower_plant;
    j["upper_plant"] = r.upper_plant;
    j["e2_L"] = r.e2_L;
    j["e2_U"] = r.e2_U;
    j["e4_L"] = r.e4_L ? json(*r.e4_L) : json(nullptr);
    j["e4_U"] = r.e4_U ? json(*r.e4_U) : json(nullptr);
    j["d"] = r.d;
    j["delta2"] = r.delta2;
    j["s_star"] = r.s_star ? json(*r.s_star) : json(nullptr);
    j["scaling_factor"] = r.scaling;
    return j;
}

inline json coeffs_to_json(const FieldCoefficients& c) { return json{{"c", c.values()}}; }

inline FieldCoefficients coeffs_from_json(const json& j)
{
    const json& arr = j.is_object() ? j.at("c") : j;
    return FieldCoefficients(arr.get<std::vector<double>>());
}

/// "uniform" or a path to a JSON file holding {"c": [...]} or a bare array.
inline FieldCoefficients load_coeffs(const std::string& spec, std::size_t n)
{
    if (spec.empty() || spec == "uniform")
        return FieldCoefficients::uniform(n);
    std::ifstream in(spec);
    if (!in)
        throw std::runtime_error("cannot open coefficient file " + spec);
    auto c = coeffs_from_json(json::parse(in));
    if (c.size() != n)
        throw std::runtime_error("coefficient file has " + std::to_string(c.size()) + " entries, instance has " +
                                 std::to_string(n));
    return c;
}

// ---------------------------------------------------------------------------
// Dual-seed grids

inline const char* seed_label(std::size_t seed_index) { return seed_index == 0 ? "zeros" : "ones"; }

struct GridCell {
    double s = 0.0;
    std::size_t seed_index = 0;
    std::optional<qmc::Estimates> estimates;
    std::string error;

    bool ok() const noexcept { return estimates.has_value(); }
};

/// Both seeds at every grid point, sorted by s; cells[2k] is the all-zeros
/// seed and cells[2k+1] the all-ones seed at s[k].
struct GridResult {
    std::vector<double> s;
    std::vector<GridCell> cells;

    const GridCell& at(std::size_t k, std::size_t seed) const { return cells.at(2 * k + seed); }
    std::size_t size() const noexcept { return s.size(); }

    /// Union of two grids, re-sorted; a point present in both keeps this grid's cells.
    GridResult merged(const GridResult& other) const
    {
        std::vector<std::pair<double, std::size_t>> keys;
        for (std::size_t k = 0; k < s.size(); ++k)
            keys.push_back({s[k], 2 * k});
        for (std::size_t k = 0; k < other.s.size(); ++k)
            if (std::none_of(s.begin(), s.end(), [&](double v) { return std::abs(v - other.s[k]) < 1e-12; }))
                keys.push_back({other.s[k], 2 * (k + s.size())});
        std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        GridResult out;
        for (const auto& [sv, idx] : keys) {
            out.s.push_back(sv);
            const auto& src = idx < cells.size() ? cells : other.cells;
            const std::size_t base = idx < cells.size() ? idx : idx - cells.size();
            out.cells.push_back(src[base]);
            out.cells.push_back(src[base + 1]);
        }
        return out;
    }
};

struct GridParams {
    qmc::RunParams run;
    std::uint64_t master_seed = 1;
    /// Extra label mixed into every cell stream so separate passes stay independent.
    std::uint64_t stream_tag = 0;
    std::size_t workers = 1;
};

/// Runs every (s, seed) cell on a bounded pool of threads. Each cell's random
/// stream depends only on (master seed, tag, s index, seed index), so the
/// result does not depend on the number of workers. Cell failures are
/// recorded and the remaining cells still run.
inline GridResult grid_run(const Instance& inst, const FieldCoefficients& coeffs, const std::vector<double>& grid,
                           const GridParams& params)
{
    if (inst.plants.size() != 2)
        throw std::invalid_argument("grid runs need a double-plant instance");
    if (!std::is_sorted(grid.begin(), grid.end()))
        throw std::invalid_argument("grid must be sorted ascending");
    const ProblemHamiltonian hp(inst);
    GridResult out;
    out.s = grid;
    out.cells.resize(2 * grid.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= out.cells.size())
                return;
            const std::size_t k = idx / 2;
            const std::size_t seed = idx % 2;
            auto& cell = out.cells[idx];
            cell.s = grid[k];
            cell.seed_index = seed;
            try {
                Rng rng = derive_stream(params.master_seed, {params.stream_tag, k, seed});
                cell.estimates = qmc::run_point(hp, coeffs, grid[k], inst.plants[seed], params.run, rng);
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(params.workers, out.cells.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w)
        pool.emplace_back(work);
    work();
    for (auto& t : pool)
        t.join();
    return out;
}

inline void write_estimates_header(std::ostream& out)
{
    out << "s,seed_string,H_mean,H_err,H0_mean,H0_err,V_mean,V_err,W_mean,W_err,m_mean,acc_rate,samples\n";
}

inline void write_estimates_row(std::ostream& out, double s, const std::string& seed,
                                const std::optional<qmc::Estimates>& e)
{
    out << format_sci(s) << ',' << seed;
    if (!e) {
        for (int k = 0; k < 10; ++k)
            out << ",nan";
        out << ",0\n";
        return;
    }
    for (double v : {e->H.mean, e->H.err, e->H0.mean, e->H0.err, e->V.mean, e->V.err, e->W.mean, e->W.err, e->m_mean,
                     e->acc_rate})
        out << ',' << format_sci(v);
    out << ',' << e->samples << '\n';
}

inline void write_grid_csv(std::ostream& out, const GridResult& g)
{
    write_estimates_header(out);
    for (const auto& c : g.cells)
        write_estimates_row(out, c.s, seed_label(c.seed_index), c.estimates);
}

// ---------------------------------------------------------------------------
// Crossing detection

class InsufficientGrid : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CrossingReport {
    bool crossing_found = false;
    std::optional<double> s_star_mc;
    /// Smaller of the two |Delta|/sigma values bracketing the reported crossing.
    double significance = 0.0;
    std::optional<double> s_star_pt;
    /// Bracketing grid points of the reported crossing.
    std::optional<double> s_lo;
    std::optional<double> s_hi;
    /// Points where |Delta| exceeded the threshold.
    std::size_t significant_points = 0;
};

/// Delta(s) = E_zeros - E_ones with combined standard error.
struct DeltaPoint {
    double s = 0.0;
    double delta = 0.0;
    double sigma = 0.0;
};

inline std::vector<DeltaPoint> delta_curve(const GridResult& g)
{
    std::vector<DeltaPoint> pts;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto& a = g.at(k, 0);
        const auto& b = g.at(k, 1);
        if (!a.ok() || !b.ok())
            continue;
        pts.push_back({g.s[k], a.estimates->H.mean - b.estimates->H.mean,
                       std::hypot(a.estimates->H.err, b.estimates->H.err)});
    }
    return pts;
}

/// A crossing is a change of sign of Delta between two consecutive points at
/// which |Delta| exceeds `z_threshold` combined standard errors; points in
/// between that are not significant are skipped. The location is the linear
/// interpolation of Delta across the sign change closest inside that bracket.
/// Among several such crossings the most significant is reported.
inline CrossingReport detect_crossing(const GridResult& g, double z_threshold = 2.0)
{
    const auto pts = delta_curve(g);
    if (pts.size() < 2)
        throw InsufficientGrid("crossing detection needs at least two grid points with both seeds");
    auto z = [](const DeltaPoint& p) {
        return p.sigma > 0.0 ? std::abs(p.delta) / p.sigma : (p.delta != 0.0 ? INFINITY : 0.0);
    };
    std::vector<std::size_t> sig;
    for (std::size_t k = 0; k < pts.size(); ++k)
        if (z(pts[k]) > z_threshold)
            sig.push_back(k);
    CrossingReport rep;
    rep.significant_points = sig.size();
    for (std::size_t a = 0; a + 1 < sig.size(); ++a) {
        const auto& lo = pts[sig[a]];
        const auto& hi = pts[sig[a + 1]];
        if ((lo.delta > 0.0) == (hi.delta > 0.0))
            continue;
        const double strength = std::min(z(lo), z(hi));
        if (rep.crossing_found && strength <= rep.significance)
            continue;
        // raw sign change inside the bracket nearest to its significant ends
        double where = lo.s;
        for (std::size_t k = sig[a]; k < sig[a + 1]; ++k) {
            const auto& p = pts[k];
            const auto& q = pts[k + 1];
            if ((p.delta > 0.0) != (q.delta > 0.0) || p.delta == 0.0) {
                where = p.delta == q.delta ? p.s : p.s + (q.s - p.s) * p.delta / (p.delta - q.delta);
                break;
            }
        }
        rep.crossing_found = true;
        rep.s_star_mc = where;
        rep.significance = strength;
        rep.s_lo = lo.s;
        rep.s_hi = hi.s;
    }
    return rep;
}

inline json to_json(const CrossingReport& r)
{
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return json{{"crossing_found", r.crossing_found}, {"s_star_mc", opt(r.s_star_mc)},
                {"significance", r.significance},     {"s_star_pt", opt(r.s_star_pt)},
                {"s_lo", opt(r.s_lo)},                {"s_hi", opt(r.s_hi)},
                {"significant_points", r.significant_points}};
}

/// Points at `step` strictly between each pair of adjacent grid points where
/// Delta changes sign, excluding points already on the grid.
inline std::vector<double> refinement_points(const GridResult& g, double step)
{
    const auto pts = delta_curve(g);
    std::vector<double> extra;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        if ((pts[k].delta > 0.0) == (pts[k + 1].delta > 0.0))
            continue;
        const auto count = static_cast<long>(std::floor((pts[k + 1].s - pts[k].s) / step + 1e-9));
        for (long i = 1; i < count; ++i) {
            const double s = std::round((pts[k].s + static_cast<double>(i) * step) * 1e9) / 1e9;
            if (s < pts[k + 1].s - 1e-12)
                extra.push_back(s);
        }
    }
    std::sort(extra.begin(), extra.end());
    extra.erase(std::unique(extra.begin(), extra.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                extra.end());
    std::erase_if(extra, [&](double s) {
        return std::any_of(g.s.begin(), g.s.end(), [&](double v) { return std::abs(v - s) < 1e-12; });
    });
    return extra;
}

/// Coarse grid, then a finer pass around every sign change of Delta.
inline GridResult refined_grid_run(const Instance& inst, const FieldCoefficients& coeffs,
                                   const std::vector<double>& grid, GridParams params, double refine_step)
{
    GridResult coarse = grid_run(inst, coeffs, grid, params);
    if (!(refine_step > 0.0))
        return coarse;
    const auto extra = refinement_points(coarse, refine_step);
    if (extra.empty())
        return coarse;
    params.stream_tag += 1;
    return coarse.merged(grid_run(inst, coeffs, extra, params));
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
    std::size_t n = 16;
    std::uint64_t master_seed = 1;
    std::string preset = "small";
    qmc::RunParams run;
    std::vector<double> s_grid = make_grid(0.05, 0.95, 0.05);
    double refine_step = 0.01;
    std::size_t workers = 1;
    std::optional<double> coeff_threshold;
    std::size_t coeff_max_tries = 10000;
    SpinTriple penalty_spins{0, 1, 2};
    std::string out_dir = "artifacts";
    bool dry_run = false;
};

inline qmc::RunParams preset_params(const std::string& preset)
{
    qmc::RunParams p;
    if (preset == "small") {
        p.beta = 150.0;
        p.sweeps = 200000;
    } else if (preset == "large") {
        p.beta = 300.0;
        p.sweeps = 100000;
    } else {
        throw std::invalid_argument("unknown preset '" + preset + "' (expected small or large)");
    }
    p.thin = 5;
    p.equil = 2500;
    return p;
}

/// Grid given as [s...] or "start:stop:step" or {"start","stop","step"}.
inline std::vector<double> parse_grid(const json& j)
{
    if (j.is_array()) {
        auto g = j.get<std::vector<double>>();
        std::sort(g.begin(), g.end());
        return g;
    }
    if (j.is_string()) {
        const auto text = j.get<std::string>();
        double a = 0, b = 0, c = 0;
        char sep1 = 0, sep2 = 0;
        std::istringstream in(text);
        if (!(in >> a >> sep1 >> b >> sep2 >> c) || sep1 != ':' || sep2 != ':')
            throw std::invalid_argument("grid string must be start:stop:step, got '" + text + "'");
        return make_grid(a, b, c);
    }
    if (j.is_object())
        return make_grid(j.at("start").get<double>(), j.at("stop").get<double>(), j.at("step").get<double>());
    throw std::invalid_argument("s_grid must be an array, a start:stop:step string, or an object");
}

inline PipelineConfig parse_config(const json& j)
{
    static const std::vector<std::string> known{"n",      "master_seed", "beta",    "s_grid",          "sweeps",
                                                "thin",   "equil",       "workers", "coeff_threshold", "preset",
                                                "refine_step", "coeff_max_tries", "penalty_bits", "out_dir",
                                                "dry_run"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("unknown config key '" + key + "'");
    PipelineConfig c;
    c.preset = j.value("preset", std::string("small"));
    c.run = preset_params(c.preset);
    c.n = j.value("n", c.n);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.run.beta = j.value("beta", c.run.beta);
    c.run.sweeps = j.value("sweeps", c.run.sweeps);
    c.run.thin = j.value("thin", c.run.thin);
    c.run.equil = j.value("equil", c.run.equil);
    c.workers = j.value("workers", c.workers);
    c.refine_step = j.value("refine_step", c.refine_step);
    c.coeff_max_tries = j.value("coeff_max_tries", c.coeff_max_tries);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.dry_run = j.value("dry_run", c.dry_run);
    if (j.contains("s_grid"))
        c.s_grid = parse_grid(j.at("s_grid"));
    if (j.contains("coeff_threshold") && !j.at("coeff_threshold").is_null())
        c.coeff_threshold = j.at("coeff_threshold").get<double>();
    if (j.contains("penalty_bits")) {
        const auto bits = j.at("penalty_bits").get<std::vector<std::uint32_t>>();
        if (bits.size() != 3 || std::any_of(bits.begin(), bits.end(), [](auto b) { return b == 0; }))
            throw std::invalid_argument("penalty_bits needs three 1-based spin indices");
        c.penalty_spins = {bits[0] - 1, bits[1] - 1, bits[2] - 1};
    }
    if (c.n < 3)
        throw std::invalid_argument("n must be at least 3");
    if (c.s_grid.size() < 2)
        throw std::invalid_argument("s_grid needs at least two points");
    for (double s : c.s_grid)
        if (!(s >= 0.0 && s <= 1.0))
            throw std::invalid_argument("s_grid values must lie in [0,1]");
    return c;
}

inline json config_to_json(const PipelineConfig& c)
{
    json j;
    j["n"] = c.n;
    j["master_seed"] = c.master_seed;
    j["preset"] = c.preset;
    j["beta"] = c.run.beta;
    j["sweeps"] = c.run.sweeps;
    j["thin"] = c.run.thin;
    j["equil"] = c.run.equil;
    j["s_grid"] = c.s_grid;
    j["refine_step"] = c.refine_step;
    j["workers"] = c.workers;
    j["coeff_threshold"] = c.coeff_threshold ? json(*c.coeff_threshold) : json(nullptr);
    j["coeff_max_tries"] = c.coeff_max_tries;
    j["penalty_bits"] = {c.penalty_spins[0] + 1, c.penalty_spins[1] + 1, c.penalty_spins[2] + 1};
    return j;
}

struct StageRecord {
    std::string name;
    std::string status; // planned, done, failed, skipped
    std::vector<std::string> files;
    std::string error;
};

struct PipelineResult {
    std::vector<StageRecord> stages;
    bool complete = false;
    json manifest;
};

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + p.string());
    out << text;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

} // namespace detail

/// Stage names in execution order.
inline std::vector<std::string> pipeline_stages(const PipelineConfig& c)
{
    std::vector<std::string> s{"generate", "select_target", "penalize", "perturb", "grid_original",
                               "crossing_original"};
    if (c.coeff_threshold) {
        s.push_back("pick_coeffs");
        s.push_back("grid_randomized");
        s.push_back("crossing_randomized");
    }
    return s;
}

/// generate -> select target -> penalize -> perturbation report -> dual-seed
/// grid -> crossing, then optionally the same grid with randomized
/// coefficients. Every stage is recorded in manifest.json; artifacts of
/// completed stages are kept when a later stage fails.
inline PipelineResult pipeline(const PipelineConfig& cfg)
{
    namespace fs = std::filesystem;
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    PipelineResult res;
    for (const auto& name : pipeline_stages(cfg))
        res.stages.push_back({name, "planned", {}, {}});

    auto write_manifest = [&] {
        json stages = json::array();
        for (const auto& st : res.stages)
            stages.push_back({{"stage", st.name}, {"status", st.status}, {"files", st.files}, {"error", st.error}});
        res.manifest = {{"config", config_to_json(cfg)},
                        {"dry_run", cfg.dry_run},
                        {"complete", res.complete},
                        {"stages", stages}};
        detail::write_text(dir / "manifest.json", detail::dump(res.manifest));
    };
    if (cfg.dry_run) {
        write_manifest();
        return res;
    }

    Instance inst, pen;
    Plant target = Plant::zeros;
    PerturbationReport report;
    FieldCoefficients rand_coeffs;
    const auto uniform = FieldCoefficients::uniform(cfg.n);
    GridParams gp;
    gp.run = cfg.run;
    gp.master_seed = cfg.master_seed;
    gp.workers = cfg.workers;

    auto stage = [&](std::size_t k, const std::function<void(StageRecord&)>& body) {
        auto& st = res.stages[k];
        try {
            body(st);
            st.status = "done";
            return true;
        } catch (const std::exception& e) {
            st.status = "failed";
            st.error = e.what();
            for (std::size_t r = k + 1; r < res.stages.size(); ++r)
                res.stages[r].status = "skipped";
            return false;
        }
    };

    bool ok = stage(0, [&](StageRecord&) {
        Rng rng = derive_stream(cfg.master_seed, {0x67656e});
        inst = generate_double_plant(cfg.n, rng);
    });
    ok = ok && stage(1, [&](StageRecord&) { target = select_penalty_target(inst); });
    ok = ok && stage(2, [&](StageRecord& st) {
        pen = add_penalty(inst, target, cfg.penalty_spins);
        write_dimacs_file(pen, (dir / "instance.cnf").string());
        st.files.push_back("instance.cnf");
    });
    ok = ok && stage(3, [&](StageRecord& st) {
        report = perturbation_report(pen, uniform);
        json j = to_json(report);
        j["target"] = to_string(target);
        j["n"] = pen.n;
        j["m"] = pen.m();
        detail::write_text(dir / "perturb.json", detail::dump(j));
        st.files.push_back("perturb.json");
    });
    GridResult original;
    ok = ok && stage(4, [&](StageRecord& st) {
        gp.stream_tag = 0x100;
        original = refined_grid_run(pen, uniform, cfg.s_grid, gp, cfg.refine_step);
        std::ostringstream csv;
        write_grid_csv(csv, original);
        detail::write_text(dir / "grid_original.csv", csv.str());
        st.files.push_back("grid_original.csv");
        for (const auto& c : original.cells)
            if (!c.ok())
                st.error += "s=" + format_sci(c.s) + " seed=" + seed_label(c.seed_index) + ": " + c.error + "; ";
    });
    ok = ok && stage(5, [&](StageRecord& st) {
        auto cr = detect_crossing(original);
        cr.s_star_pt = report.s_star;
        detail::write_text(dir / "crossing.json", detail::dump(to_json(cr)));
        st.files.push_back("crossing.json");
    });
    if (cfg.coeff_threshold) {
        ok = ok && stage(6, [&](StageRecord& st) {
            Rng rng = derive_stream(cfg.master_seed, {0x636f6566});
            rand_coeffs = pick_randomized_coeffs(report.d, *cfg.coeff_threshold, rng, cfg.coeff_max_tries);
            json j = coeffs_to_json(rand_coeffs);
            j["weighted_delta"] = weighted_delta(report.d, rand_coeffs);
            j["threshold"] = *cfg.coeff_threshold;
            detail::write_text(dir / "coeffs.json", detail::dump(j));
            st.files.push_back("coeffs.json");
        });
        GridResult randomized;
        ok = ok && stage(7, [&](StageRecord& st) {
            gp.stream_tag = 0x200;
            randomized = refined_grid_run(pen, rand_coeffs, cfg.s_grid, gp, cfg.refine_step);
            std::ostringstream csv;
            write_grid_csv(csv, randomized);
            detail::write_text(dir / "grid_randomized.csv", csv.str());
            st.files.push_back("grid_randomized.csv");
        });
        ok = ok && stage(8, [&](StageRecord& st) {
            auto cr = detect_crossing(randomized);
            const auto rr = perturbation_report(pen, rand_coeffs);
            cr.s_star_pt = rr.s_star;
            detail::write_text(dir / "crossing_randomized.json", detail::dump(to_json(cr)));
            st.files.push_back("crossing_randomized.json");
        });
    }
    res.complete = ok;
    write_manifest();
    return res;
}

} // namespace qaa

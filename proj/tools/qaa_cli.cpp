// Command-line front end: gen, exact, perturb, hist, qmc, pipeline.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qaa/dimacs.hpp"
#include "qaa/experiment.hpp"
#include "qaa/perturbation.hpp"
#include "qaa/qmc.hpp"
#include "qaa/spectrum.hpp"

namespace {

constexpr int exit_cap_exceeded = 2;

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    return out;
}

qaa::SpinTriple parse_bits(const std::string& text)
{
    std::vector<std::uint32_t> v;
    std::stringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ','))
        v.push_back(static_cast<std::uint32_t>(std::stoul(tok)));
    if (v.size() != 3 || v[0] == 0 || v[1] == 0 || v[2] == 0)
        throw std::invalid_argument("--penalty-bits needs three 1-based indices like 1,2,3");
    return {v[0] - 1, v[1] - 1, v[2] - 1};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Planted 3SAT instances, exact spectra, perturbation theory and worldline QMC"};
    app.require_subcommand(1);

    // gen
    std::size_t gen_n = 16;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    std::string gen_penalize = "none";
    std::string gen_bits = "1,2,3";
    std::size_t gen_cap = 0;
    auto* gen = app.add_subcommand("gen", "generate a certified double-plant instance");
    gen->add_option("--n", gen_n, "number of spins")->required();
    gen->add_option("--seed", gen_seed, "random seed")->required();
    gen->add_option("--out", gen_out, "output DIMACS path")->required();
    gen->add_option("--penalize", gen_penalize, "none, auto, zeros or ones")
        ->check(CLI::IsMember({"none", "auto", "zeros", "ones"}));
    gen->add_option("--penalty-bits", gen_bits, "1-based spins of the penalty term");
    gen->add_option("--clause-cap", gen_cap, "abort after this many clauses (default 20 n ln n)");

    // exact
    std::string ex_instance, ex_coeffs = "uniform", ex_grid = "0:1:0.01", ex_out;
    auto* exact = app.add_subcommand("exact", "lowest two eigenpairs of H(s) over an s grid");
    exact->add_option("--instance", ex_instance)->required();
    exact->add_option("--coeffs", ex_coeffs, "coefficient JSON or 'uniform'");
    exact->add_option("--s-grid", ex_grid, "start:stop:step");
    exact->add_option("--out", ex_out)->required();

    // perturb
    std::string pt_instance, pt_coeffs = "uniform", pt_out;
    auto* perturb = app.add_subcommand("perturb", "second/fourth-order report");
    perturb->add_option("--instance", pt_instance)->required();
    perturb->add_option("--coeffs", pt_coeffs);
    perturb->add_option("--out", pt_out)->required();

    // hist
    std::string hs_instance, hs_out;
    std::size_t hs_samples = 1000000, hs_bins = 100;
    std::uint64_t hs_seed = 1;
    auto* hist = app.add_subcommand("hist", "histogram of the randomized second-order difference");
    hist->add_option("--instance", hs_instance)->required();
    hist->add_option("--samples", hs_samples);
    hist->add_option("--bins", hs_bins);
    hist->add_option("--rng-seed", hs_seed);
    hist->add_option("--out", hs_out)->required();

    // qmc
    std::string q_instance, q_coeffs = "uniform", q_seed_string = "zeros", q_out;
    double q_s = 0.5;
    qaa::qmc::RunParams q_params;
    std::uint64_t q_rng = 1;
    auto* qmc = app.add_subcommand("qmc", "one seeded point of the worldline Monte Carlo");
    qmc->add_option("--instance", q_instance)->required();
    qmc->add_option("--coeffs", q_coeffs);
    qmc->add_option("--s", q_s)->required()->check(CLI::Range(0.0, 1.0));
    qmc->add_option("--seed-string", q_seed_string)->check(CLI::IsMember({"zeros", "ones"}));
    qmc->add_option("--beta", q_params.beta);
    qmc->add_option("--sweeps", q_params.sweeps);
    qmc->add_option("--thin", q_params.thin);
    qmc->add_option("--equil", q_params.equil);
    qmc->add_option("--rng-seed", q_rng);
    qmc->add_option("--out", q_out)->required();

    // pipeline
    std::string pl_config;
    bool pl_dry = false;
    auto* pipe = app.add_subcommand("pipeline", "full experiment from a JSON config");
    pipe->add_option("--config", pl_config)->required();
    pipe->add_flag("--dry-run", pl_dry, "write the stage plan only");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            qaa::Rng rng = qaa::make_rng(gen_seed);
            qaa::GenerationOptions opt;
            if (gen_cap > 0)
                opt.clause_cap = gen_cap;
            qaa::Instance inst;
            try {
                inst = qaa::generate_double_plant(gen_n, rng, opt);
            } catch (const qaa::GenerationLimitExceeded& e) {
                std::cerr << e.what() << '\n';
                return exit_cap_exceeded;
            }
            if (gen_penalize != "none") {
                const qaa::Plant target = gen_penalize == "auto"    ? qaa::select_penalty_target(inst)
                                          : gen_penalize == "zeros" ? qaa::Plant::zeros
                                                                    : qaa::Plant::ones;
                inst = qaa::add_penalty(inst, target, parse_bits(gen_bits));
            }
            qaa::write_dimacs_file(inst, gen_out);
            std::cout << "n=" << inst.n << " m=" << inst.m() << " certified\n";
        } else if (*exact) {
            const auto inst = qaa::read_dimacs_file(ex_instance);
            const auto coeffs = qaa::load_coeffs(ex_coeffs, inst.n);
            const auto grid = qaa::parse_grid(qaa::json(ex_grid));
            const auto rows = qaa::spectrum_scan(inst, coeffs, grid);
            auto out = open_out(ex_out);
            qaa::write_spectrum_csv(out, rows);
        } else if (*perturb) {
            const auto inst = qaa::read_dimacs_file(pt_instance);
            const auto coeffs = qaa::load_coeffs(pt_coeffs, inst.n);
            auto out = open_out(pt_out);
            out << qaa::to_json(qaa::perturbation_report(inst, coeffs)).dump(2) << '\n';
        } else if (*hist) {
            const auto inst = qaa::read_dimacs_file(hs_instance);
            const auto d = qaa::d_vector(inst);
            qaa::Rng rng = qaa::make_rng(hs_seed);
            const auto samples = qaa::randomized_delta_samples(d, hs_samples, rng);
            auto out = open_out(hs_out);
            qaa::write_histogram_csv(out, qaa::make_histogram(samples.values, hs_bins));
            std::cout << "mean=" << qaa::format_sci(samples.mean) << " variance=" << qaa::format_sci(samples.variance)
                      << '\n';
        } else if (*qmc) {
            const auto inst = qaa::read_dimacs_file(q_instance);
            const auto coeffs = qaa::load_coeffs(q_coeffs, inst.n);
            const auto seed = q_seed_string == "zeros" ? qaa::BitString::zeros(inst.n) : qaa::BitString::ones(inst.n);
            qaa::Rng rng = qaa::make_rng(q_rng);
            const auto est = qaa::qmc::run_point(inst, coeffs, q_s, seed, q_params, rng);
            auto out = open_out(q_out);
            qaa::write_estimates_header(out);
            qaa::write_estimates_row(out, q_s, q_seed_string, est);
        } else if (*pipe) {
            std::ifstream in(pl_config);
            if (!in)
                throw std::runtime_error("cannot open config " + pl_config);
            auto cfg = qaa::parse_config(qaa::json::parse(in));
            cfg.dry_run = cfg.dry_run || pl_dry;
            const auto res = qaa::pipeline(cfg);
            for (const auto& st : res.stages)
                std::cout << st.name << ": " << st.status << (st.error.empty() ? "" : " (" + st.error + ")") << '\n';
            if (!cfg.dry_run && !res.complete)
                return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

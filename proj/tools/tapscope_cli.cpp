// tapscope: command line front end over the harness.
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tapscope/errors.hpp"
#include "tapscope/harness.hpp"

using namespace tapscope;

namespace {

struct Overrides {
    std::string config;
    std::string seed;
    std::string seeds;
    std::string out;
    std::string format;
    std::string variant;
    std::string eig;
    int n = 0, k = 0, workers = 0, probe_points = 0, restarts = 0, sf_k = 0, order = 0;
    double lambda = 0, gamma0 = -1, epsilon = 0;
    std::string lambdas, ns;
    bool quiet = false;
    bool no_timing = false;
};

std::vector<std::string> split(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string t;
    while (std::getline(ss, t, ','))
        if (!t.empty()) out.push_back(t);
    return out;
}

ExperimentConfig build_config(const Overrides& o)
{
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (!o.seed.empty()) c.seeds = parse_seed_list(o.seed);
    if (!o.seeds.empty()) c.seeds = parse_seed_list(o.seeds);
    if (!o.out.empty()) c.output_dir = o.out;
    if (!o.format.empty()) c.formats = split(o.format);
    if (!o.variant.empty()) c.model.variant = parse_variant(o.variant);
    if (!o.eig.empty()) c.eigensolver = o.eig;
    if (o.n) c.model.n = o.n;
    if (o.k) c.k = o.k;
    if (o.workers) c.workers = o.workers;
    if (o.probe_points) c.probe_points = o.probe_points;
    if (o.restarts) c.restarts = o.restarts;
    if (o.sf_k) c.sf_k = o.sf_k;
    if (o.order) c.quadrature_order = o.order;
    if (o.lambda) c.model.lambda = o.lambda;
    if (o.gamma0 >= 0) c.model.gamma0 = o.gamma0;
    if (o.epsilon) c.epsilon = o.epsilon;
    if (o.no_timing) c.record_timing = false;
    try {
        for (const auto& s : split(o.lambdas)) c.sweep.lambdas.push_back(std::stod(s));
        for (const auto& s : split(o.ns)) c.sweep.ns.push_back(std::stoi(s));
    } catch (const std::exception&) {
        throw DomainError("bad --lambdas / --ns list");
    }
    return c;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"tapscope: state evolution, TAP landscape and comparison-inequality diagnostics"};
    app.require_subcommand(1, 1);
    Overrides o;
    bool print_config = false;

    const std::vector<std::pair<std::string, std::string>> cmds{
        {"se", "state evolution recursion and fixed point"},
        {"amp", "AMP runs against state evolution"},
        {"tap-probe", "stationary point and convexity probe of the TAP free energy"},
        {"sf-verify", "conditional comparison identities and objective comparison"},
        {"maxmin", "scalar max-min certificate"},
        {"full", "whole pipeline with every criterion"},
        {"sweep", "grid over lambda and/or n"}};
    for (const auto& [name, help] : cmds) {
        CLI::App* s = app.add_subcommand(name, help);
        s->add_option("--config,-c", o.config, "JSON config file");
        s->add_option("--seed", o.seed, "single seed (or list)");
        s->add_option("--seeds", o.seeds, "seed list, e.g. 1-20 or 1,4,9");
        s->add_option("--out,-o", o.out, "output directory");
        s->add_option("--format", o.format, "comma list of json,csv,svg");
        s->add_option("--n", o.n, "dimension");
        s->add_option("--lambda", o.lambda, "signal strength");
        s->add_option("--gamma0", o.gamma0, "side-information strength");
        s->add_option("--variant", o.variant, "AMS or FMM");
        s->add_option("--k", o.k, "AMP iterations");
        s->add_option("--epsilon", o.epsilon, "probe ball radius (per sqrt n)");
        s->add_option("--probe-points", o.probe_points, "probe points per seed");
        s->add_option("--restarts", o.restarts, "Newton restarts per seed");
        s->add_option("--sf-k", o.sf_k, "iterations conditioned on for the SF norms");
        s->add_option("--order", o.order, "base Gauss-Hermite order");
        s->add_option("--workers", o.workers, "seed-level worker threads");
        s->add_option("--eig", o.eig, "eigensolver: auto, dense or lobpcg");
        s->add_option("--lambdas", o.lambdas, "sweep: comma list of lambdas");
        s->add_option("--ns", o.ns, "sweep: comma list of n");
        s->add_flag("--quiet,-q", o.quiet, "no summary on stdout");
        s->add_flag("--print-config", print_config, "print the effective config as JSON and exit");
        s->add_flag("--no-timing", o.no_timing, "omit timestamps and timings from reports");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string name = app.get_subcommands().front()->get_name();

    ExperimentConfig cfg;
    try {
        cfg = build_config(o);
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "parameter error: " << e.what() << '\n';
        return kExitRegime;
    }

    if (print_config) {
        std::cout << serialize_config(cfg) << '\n';
        return kExitPass;
    }
    CommandResult r = run_command(name, cfg);
    try {
        const auto files = write_outputs(r, cfg);
        if (!o.quiet) {
            std::cout << r.summary;
            for (const auto& f : files) std::cout << "wrote " << f << '\n';
        }
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kExitIo;
    }
    if (r.exit_code != kExitPass && r.exit_code != kExitCriterion) std::cerr << r.summary;
    return r.exit_code;
}

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tapscope/model.hpp"
#include "tapscope/state_evolution.hpp"
#include "tapscope/tap.hpp"

namespace tapscope {

inline constexpr int kConfigVersion = 1;

enum ExitCode : int { kExitPass = 0, kExitCriterion = 1, kExitRegime = 2, kExitIo = 3 };

struct MaxMinConfig {
    double alpha_v_min = 0.0;
    double alpha_v_max = 0.3;
    double alpha_v_step = 0.01;
    int grid = 201;
    double box = 10.0;
    bool adaptive_box = true;
    bool operator==(const MaxMinConfig&) const = default;
};

struct SweepConfig {
    std::vector<double> lambdas;  // empty: keep model.lambda
    std::vector<int> ns;          // empty: keep model.n
    bool operator==(const SweepConfig&) const = default;
};

struct ExperimentConfig {
    int version = kConfigVersion;
    ModelParams model{};
    int k = 12;
    double epsilon = 0.05;
    int probe_points = 50;
    int restarts = 10;
    int compare_points = 5;
    int compare_directions = 16;
    int sf_k = 3;  // iterations conditioned on for the B_SF / T_SF norms
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    int quadrature_order = 200;
    std::string eigensolver = "auto";
    int dense_max_n = 400;
    int workers = 1;
    std::string output_dir = "out";
    std::vector<std::string> formats{"json"};
    bool record_timing = true;
    MaxMinConfig maxmin{};
    SweepConfig sweep{};

    bool operator==(const ExperimentConfig&) const = default;

    // Throws DomainError on malformed fields, RegimeError on parameter
    // combinations outside the model's regime.
    void validate() const;
    EigOptions eig_options() const;
};

std::string serialize_config(const ExperimentConfig& c);
ExperimentConfig parse_config(const std::string& text);  // DomainError on bad input
ExperimentConfig load_config(const std::string& path);   // IoError if unreadable

// "7", "1,3,9", "1-20" or mixes like "1-5,9".
std::vector<std::uint64_t> parse_seed_list(const std::string& s);

// Which pipeline stages run_seed executes.
struct Stages {
    bool amp_se = true;
    bool stationary = true;
    bool probe = true;
    bool sf = true;
    bool compare = true;
};

// Per-seed outcome of the pipeline. Stage errors are recorded in `errors`
// and later stages still run when their inputs exist.
struct SeedRecord {
    std::uint64_t seed = 0;
    std::map<std::string, std::string> errors;
    std::map<std::string, double> timing;

    // AMP vs state evolution
    double max_q_gap = 0.0;
    double gg_gap = 0.0;        // against the closed-form K
    double gg_gap_joint = 0.0;  // against the recursion covariance
    double mm_gap = 0.0;
    double max_overlap_gap = 0.0;
    double max_onsager_gap = 0.0;
    double sliced_w2 = 0.0;

    // stationary point
    bool newton_converged = false;
    double grad_norm = 0.0;
    double dist_from_center = 0.0;
    double max_abs = 0.0;
    bool unique = false;
    double restart_pairwise_max = 0.0;
    int newton_steps = 0;

    // convexity probe
    double probe_min = 0.0;
    double center_lambda_min = 0.0;
    double origin_lambda_min = 0.0;
    int probe_count = 0;
    bool probe_converged = true;

    // conditional SF (trace at k)
    double wr_residual = 0.0;
    double bdef_residual = 0.0;
    double rts_asymmetry = 0.0;
    double identity_residual = 0.0;
    double annihilation = 0.0;
    double bsf_minus_b0_k = 0.0;
    double t_minus_tsf_k = 0.0;
    // same norms when conditioning on the first sf_k iterates
    double bsf_minus_b0 = 0.0;
    double t_minus_tsf = 0.0;

    // objective comparison
    double goe_sup = 0.0;
    double sf_upper_sup = 0.0;
    double sf_lower_sup = 0.0;
    double coupling_gap = 0.0;
};

SeedRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const Stages& stages = {});

// Runs run_seed over cfg.seeds with at most cfg.workers threads; sorted by seed.
std::vector<SeedRecord> run_seeds(const ExperimentConfig& cfg, const Stages& stages = {});

// Gradient / Hessian numerics on an instance with n = min(params.n, n_max):
// coordinate central differences of F (h = 1e-6) at `points` random m, each on
// 20 random coordinates; directional differences of the gradient against the
// Hessian quadratic form; direct-Y vs W-plus-spike Hessian paths.
struct NumericsReport {
    int n = 0;
    double grad_fd_rel = 0.0;   // max over points of ||fd - grad||/||grad|| on the sampled coordinates
    double hess_fd_rel = 0.0;   // max |(grad(m+hv)-grad(m-hv))/2h . v - v^T H v| / |v^T H v|
    double split_rel = 0.0;     // max relative gap of the two quadratic-form paths
    double matrix_split_rel = 0.0;  // ||H_Y - H_split||_F / ||H_Y||_F at the first point
};
NumericsReport numerics_check(const ModelParams& params, std::uint64_t seed, int points = 20, int n_max = 200);

// One acceptance criterion as reported by `full`.
struct Criterion {
    std::string id;
    std::string name;
    bool pass = false;
    std::string detail;
};

Criterion crit_fixed_point(const FixedPointConstants& fp, double lambda);
Criterion crit_amp(const std::vector<SeedRecord>& recs);             // needs the amp_se stage
Criterion crit_sf_identities(const std::vector<SeedRecord>& recs);   // sf stage
Criterion crit_convexity(const std::vector<SeedRecord>& recs);       // probe stage
Criterion crit_stationary(const std::vector<SeedRecord>& recs, double eps);
Criterion crit_dominance(const std::vector<SeedRecord>& recs);       // compare stage
Criterion crit_numerics(const NumericsReport& nr);
// Scalar certificate at cfg.model's (lambda, gamma0, variant), Theta check included.
Criterion crit_certificate(const ExperimentConfig& cfg);

// Medians of ||B_SF - B0||_op and ||T - T_SF||_op conditioning on the first
// cfg.sf_k iterates, over the first max_seeds seeds, at each n.
struct SfTrend {
    int k = 0;
    std::vector<int> ns;
    std::vector<double> median_bsf_minus_b0, median_t_minus_tsf;
    std::vector<int> runs;
};
SfTrend sf_trend(const ExperimentConfig& cfg, const std::vector<int>& ns, int max_seeds = 10);
Criterion crit_sf_trend(const SfTrend& t);

struct CommandResult {
    int exit_code = kExitPass;
    std::string name;
    std::string json;  // report (source of truth)
    std::map<std::string, std::string> files;  // extra outputs: file name -> content
    std::string summary;  // one short human-readable paragraph
};

CommandResult cmd_se(const ExperimentConfig& cfg);
CommandResult cmd_amp(const ExperimentConfig& cfg);
CommandResult cmd_tap_probe(const ExperimentConfig& cfg);
CommandResult cmd_sf_verify(const ExperimentConfig& cfg);
CommandResult cmd_maxmin(const ExperimentConfig& cfg);
CommandResult cmd_full(const ExperimentConfig& cfg);
CommandResult cmd_sweep(const ExperimentConfig& cfg);

// Dispatch by subcommand name, mapping exceptions to exit codes and a
// structured error report.
CommandResult run_command(const std::string& name, const ExperimentConfig& cfg);

// Writes <dir>/<name>.json plus requested csv/svg files. Creates the
// directory; throws IoError when it cannot be written.
std::vector<std::string> write_outputs(const CommandResult& r, const ExperimentConfig& cfg);

struct Series {
    std::string name;
    std::vector<double> x, y;
};
std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series);

}  // namespace tapscope

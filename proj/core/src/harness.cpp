#include "tapscope/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "tapscope/amp.hpp"
#include "tapscope/errors.hpp"
#include "tapscope/maxmin.hpp"
#include "tapscope/quadrature.hpp"
#include "tapscope/rng.hpp"
#include "tapscope/sf_conditional.hpp"
#include "tapscope/state_evolution.hpp"
#include "tapscope/stats.hpp"

namespace tapscope {

using json = nlohmann::ordered_json;

namespace {

const char* kToolVersion = "0.3.0";

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string timestamp_utc()
{
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Keeps doubles finite in JSON: nlohmann writes null for nan/inf.
double finite_or(double v, double fallback = std::numeric_limits<double>::quiet_NaN())
{
    return std::isfinite(v) ? v : fallback;
}

json matrix_json(const Eigen::MatrixXd& A)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < A.cols(); ++j) r.push_back(A(i, j));
        rows.push_back(r);
    }
    return rows;
}

json summary_json(const std::vector<double>& v)
{
    if (v.empty()) return json{{"count", 0}};
    Summary s = summarize(v);
    return json{{"count", s.count}, {"median", s.median}, {"p05", s.p05}, {"p95", s.p95},
                {"mean", s.mean},   {"min", s.min},       {"max", s.max}};
}

}  // namespace

// ---------------------------------------------------------------- config

EigOptions ExperimentConfig::eig_options() const
{
    EigOptions e;
    e.method = parse_eig_method(eigensolver);
    e.dense_max_n = dense_max_n;
    return e;
}

void ExperimentConfig::validate() const
{
    if (version != kConfigVersion)
        throw DomainError("config version " + std::to_string(version) + " not supported (expected " +
                          std::to_string(kConfigVersion) + ")");
    model.validate();
    if (k < 2) throw DomainError("k must be >= 2");
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be > 0");
    if (probe_points < 1) throw DomainError("probe_points must be >= 1");
    if (restarts < 0) throw DomainError("restarts must be >= 0");
    if (compare_points < 1) throw DomainError("compare_points must be >= 1");
    if (compare_directions < 0) throw DomainError("compare_directions must be >= 0");
    if (sf_k < 2 || sf_k > k) throw DomainError("sf_k must lie in [2, k]");
    if (seeds.empty()) throw DomainError("seed list is empty");
    if (quadrature_order < 2) throw DomainError("quadrature_order must be >= 2");
    parse_eig_method(eigensolver);
    if (dense_max_n < 0) throw DomainError("dense_max_n must be >= 0");
    if (workers < 1) throw DomainError("workers must be >= 1");
    for (const auto& f : formats)
        if (f != "json" && f != "csv" && f != "svg") throw DomainError("unknown format '" + f + "'");
    if (!(maxmin.alpha_v_step > 0.0) || maxmin.alpha_v_min > maxmin.alpha_v_max)
        throw DomainError("maxmin alpha_v grid is empty");
    if (!(maxmin.alpha_v_max < 1.0)) throw DomainError("maxmin alpha_v must stay below 1");
    if (maxmin.grid < 3) throw DomainError("maxmin grid must be >= 3");
    if (!(maxmin.box > 0.0)) throw DomainError("maxmin box must be > 0");
    for (double l : sweep.lambdas)
        if (!(l > 0.0)) throw DomainError("sweep lambdas must be > 0");
    for (int n : sweep.ns)
        if (n < 2) throw DomainError("sweep ns must be >= 2");

    if (model.variant == Variant::FMM && !(model.lambda > 1.0))
        throw RegimeError("FMM needs lambda > 1 (no informative fixed point for lambda <= 1)");
    if (model.variant == Variant::AMS && !(model.gamma0 > 0.0))
        throw RegimeError("AMS needs gamma0 > 0");
}

namespace {

json config_json(const ExperimentConfig& c)
{
    json j;
    j["version"] = c.version;
    j["model"] = {{"n", c.model.n},
                  {"lambda", c.model.lambda},
                  {"gamma0", c.model.gamma0},
                  {"variant", to_string(c.model.variant)},
                  {"fix_spike_to_ones", c.model.fix_spike_to_ones}};
    j["k"] = c.k;
    j["epsilon"] = c.epsilon;
    j["probe_points"] = c.probe_points;
    j["restarts"] = c.restarts;
    j["compare_points"] = c.compare_points;
    j["compare_directions"] = c.compare_directions;
    j["sf_k"] = c.sf_k;
    j["seeds"] = c.seeds;
    j["quadrature_order"] = c.quadrature_order;
    j["eigensolver"] = c.eigensolver;
    j["dense_max_n"] = c.dense_max_n;
    j["workers"] = c.workers;
    j["output_dir"] = c.output_dir;
    j["formats"] = c.formats;
    j["record_timing"] = c.record_timing;
    j["maxmin"] = {{"alpha_v_min", c.maxmin.alpha_v_min}, {"alpha_v_max", c.maxmin.alpha_v_max},
                   {"alpha_v_step", c.maxmin.alpha_v_step}, {"grid", c.maxmin.grid},
                   {"box", c.maxmin.box},                 {"adaptive_box", c.maxmin.adaptive_box}};
    j["sweep"] = {{"lambdas", c.sweep.lambdas}, {"ns", c.sweep.ns}};
    return j;
}

template <class T>
void read(const json& j, const char* key, T& out)
{
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) { return config_json(c).dump(2); }

ExperimentConfig parse_config(const std::string& text)
{
    ExperimentConfig c;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DomainError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw DomainError("config must be a JSON object");
    static const std::vector<std::string> known{
        "version",      "model",       "k",           "epsilon",        "probe_points", "restarts",
        "compare_points", "compare_directions", "sf_k", "seeds",       "seed_range",   "quadrature_order",
        "eigensolver",  "dense_max_n", "workers",     "output_dir",     "formats",      "record_timing",
        "maxmin",       "sweep"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw DomainError("unknown config key '" + it.key() + "'");
    try {
        if (!j.contains("version")) throw DomainError("config needs a 'version' field");
        read(j, "version", c.version);
        if (j.contains("model")) {
            const json& m = j.at("model");
            read(m, "n", c.model.n);
            read(m, "lambda", c.model.lambda);
            read(m, "gamma0", c.model.gamma0);
            read(m, "fix_spike_to_ones", c.model.fix_spike_to_ones);
            if (m.contains("variant")) c.model.variant = parse_variant(m.at("variant").get<std::string>());
        }
        read(j, "k", c.k);
        read(j, "epsilon", c.epsilon);
        read(j, "probe_points", c.probe_points);
        read(j, "restarts", c.restarts);
        read(j, "compare_points", c.compare_points);
        read(j, "compare_directions", c.compare_directions);
        read(j, "sf_k", c.sf_k);
        read(j, "seeds", c.seeds);
        if (j.contains("seed_range")) {
            const json& r = j.at("seed_range");
            const auto first = r.at("first").get<std::uint64_t>();
            const auto count = r.at("count").get<std::uint64_t>();
            c.seeds.clear();
            for (std::uint64_t i = 0; i < count; ++i) c.seeds.push_back(first + i);
        }
        read(j, "quadrature_order", c.quadrature_order);
        read(j, "eigensolver", c.eigensolver);
        read(j, "dense_max_n", c.dense_max_n);
        read(j, "workers", c.workers);
        read(j, "output_dir", c.output_dir);
        read(j, "formats", c.formats);
        read(j, "record_timing", c.record_timing);
        if (j.contains("maxmin")) {
            const json& m = j.at("maxmin");
            read(m, "alpha_v_min", c.maxmin.alpha_v_min);
            read(m, "alpha_v_max", c.maxmin.alpha_v_max);
            read(m, "alpha_v_step", c.maxmin.alpha_v_step);
            read(m, "grid", c.maxmin.grid);
            read(m, "box", c.maxmin.box);
            read(m, "adaptive_box", c.maxmin.adaptive_box);
        }
        if (j.contains("sweep")) {
            read(j.at("sweep"), "lambdas", c.sweep.lambdas);
            read(j.at("sweep"), "ns", c.sweep.ns);
        }
    } catch (const json::exception& e) {
        throw DomainError(std::string("bad config field: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s)
{
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    auto num = [&](const std::string& t) -> std::uint64_t {
        if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
            throw DomainError("bad seed list '" + s + "'");
        return std::stoull(t);
    };
    while (std::getline(ss, item, ',')) {
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            out.push_back(num(item));
        } else {
            const auto a = num(item.substr(0, dash)), b = num(item.substr(dash + 1));
            if (b < a) throw DomainError("bad seed range '" + item + "'");
            for (auto v = a; v <= b; ++v) out.push_back(v);
        }
    }
    if (out.empty()) throw DomainError("empty seed list");
    return out;
}

// ---------------------------------------------------------------- pipeline

namespace {

AmpTrace truncate_trace(const AmpTrace& tr, int k)
{
    AmpTrace t = tr;
    t.k = k;
    t.M = tr.M.leftCols(k);
    t.G = tr.G.leftCols(k);
    t.Z = tr.Z.leftCols(k + 1);
    t.onsager.resize(k);
    return t;
}

}  // namespace

SeedRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const Stages& stages)
{
    SeedRecord rec;
    rec.seed = seed;
    const ModelParams& mp = cfg.model;
    const double c = chi(mp.variant);
    const auto t_all = std::chrono::steady_clock::now();

    auto t0 = std::chrono::steady_clock::now();
    ModelInstance inst = make_instance(mp, seed);
    AmpTrace tr = run_amp_z2(inst, cfg.k);
    rec.timing["instance_amp"] = seconds_since(t0);
    const FixedPointConstants fp = solve_fixed_point(mp.lambda, mp.gamma0, c, cfg.quadrature_order);
    const Eigen::VectorXd center = tr.M.col(cfg.k - 1);

    auto stage = [&](const char* name, const std::function<void()>& body) {
        const auto ts = std::chrono::steady_clock::now();
        try {
            body();
        } catch (const std::exception& e) {
            rec.errors[name] = e.what();
        }
        rec.timing[name] = seconds_since(ts);
    };

    if (stages.amp_se) {
        stage("amp_se", [&] {
            SeCurve curve = run_recursion(mp.lambda, mp.gamma0, c, cfg.k, cfg.quadrature_order);
            SeSample sample = sample_se(curve, mp.n, stream_key(seed, "se-compare"));
            SeDiscrepancy d = empirical_vs_se(tr, inst, curve, sample, nullptr, 64, seed);
            rec.max_q_gap = d.max_q_gap;
            rec.gg_gap = d.gg_gap;
            rec.mm_gap = d.mm_gap;
            rec.max_overlap_gap = d.max_overlap_gap;
            rec.max_onsager_gap = d.max_onsager_gap;
            rec.sliced_w2 = d.sliced_w2;
            const Eigen::MatrixXd Kj = joint_covariance(curve);
            const Eigen::MatrixXd GG = tr.G.transpose() * tr.G / double(mp.n);
            rec.gg_gap_joint = (GG - Kj.topLeftCorner(cfg.k, cfg.k)).cwiseAbs().maxCoeff();
        });
    }

    TapContext ctx(inst, fp.q_inf);
    std::optional<Eigen::VectorXd> mstar;
    if (stages.stationary) {
        stage("stationary", [&] {
            StationaryReport st = find_stationary_point(ctx, center, center, cfg.epsilon, cfg.restarts, seed);
            rec.newton_converged = st.main.converged;
            rec.grad_norm = st.main.grad_norm;
            rec.dist_from_center = st.dist_from_center;
            rec.max_abs = st.max_abs;
            rec.unique = st.unique;
            rec.restart_pairwise_max = st.restart_pairwise_max;
            rec.newton_steps = st.main.steps;
            if (st.main.converged) mstar = st.main.m;
        });
    }

    if (stages.probe) {
        stage("probe", [&] {
            ProbeOptions po;
            po.epsilon = cfg.epsilon;
            po.n_points = cfg.probe_points;
            po.eig = cfg.eig_options();
            po.seed = seed;
            if (mstar) po.toward = &*mstar;
            ConvexityReport cr = convexity_probe(ctx, tr, cfg.k, po);
            rec.probe_min = cr.global_min;
            rec.center_lambda_min = cr.points.front().lambda_min;
            rec.probe_count = cr.probed;
            for (const auto& p : cr.points) rec.probe_converged = rec.probe_converged && p.converged;
            rec.origin_lambda_min =
                min_eig_scaled_hessian(ctx, Eigen::VectorXd::Zero(mp.n), cfg.eig_options()).value;
        });
    }

    std::optional<ConditioningData> cond;
    if (stages.sf) {
        stage("sf", [&] {
            cond = build_conditioning(tr, inst);
            rec.wr_residual = cond->wr_residual;
            rec.bdef_residual = cond->bdef_residual;
            rec.rts_asymmetry = cond->rts_asymmetry;
            rec.bsf_minus_b0_k = cond->bsf_minus_b0_op;
            rec.t_minus_tsf_k = cond->t_minus_tsf_op;
            IdentityReport id = verify_conditional_identity(inst.W, *cond, 4, seed);
            rec.identity_residual = id.relative;
            rec.annihilation = id.annihilation;
            ConditioningData small = build_conditioning(truncate_trace(tr, cfg.sf_k), inst);
            rec.bsf_minus_b0 = small.bsf_minus_b0_op;
            rec.t_minus_tsf = small.t_minus_tsf_op;
        });
    }

    if (stages.compare && cond) {
        stage("compare", [&] {
            auto g = substream(seed, "xi");
            const Eigen::VectorXd xi = normal_vector(g, mp.n);
            ComparisonOptions co;
            co.n_points = cfg.compare_points;
            co.epsilon = cfg.epsilon;
            co.directions = cfg.compare_directions;
            co.eig = cfg.eig_options();
            co.seed = seed;
            ComparisonReport r = compare_objectives(ctx, tr, *cond, xi, co);
            rec.goe_sup = r.goe_sup;
            rec.sf_upper_sup = r.sf_upper_sup;
            rec.sf_lower_sup = r.sf_lower_sup;
            rec.coupling_gap = r.coupling_gap;
        });
    }
    rec.timing["total"] = seconds_since(t_all);
    return rec;
}

std::vector<SeedRecord> run_seeds(const ExperimentConfig& cfg, const Stages& stages)
{
    std::vector<std::uint64_t> seeds = cfg.seeds;
    std::sort(seeds.begin(), seeds.end());
    std::vector<SeedRecord> out;
    out.reserve(seeds.size());
    const std::size_t w = static_cast<std::size_t>(std::max(1, cfg.workers));
    for (std::size_t i = 0; i < seeds.size(); i += w) {
        std::vector<std::future<SeedRecord>> futs;
        for (std::size_t j = i; j < std::min(seeds.size(), i + w); ++j)
            futs.push_back(std::async(w == 1 ? std::launch::deferred : std::launch::async,
                                      [&cfg, &stages, s = seeds[j]] { return run_seed(cfg, s, stages); }));
        for (auto& f : futs) out.push_back(f.get());
    }
    return out;
}

NumericsReport numerics_check(const ModelParams& params, std::uint64_t seed, int points, int n_max)
{
    ModelParams mp = params;
    mp.n = std::min(params.n, n_max);
    const FixedPointConstants fp = solve_fixed_point(mp.lambda, mp.gamma0, chi(mp.variant));
    ModelInstance inst = make_instance(mp, seed);
    TapContext ctx(inst, fp.q_inf);
    NumericsReport rep;
    rep.n = mp.n;
    auto gen = substream(seed, "numerics");
    std::uniform_real_distribution<double> U(-0.9, 0.9);
    std::uniform_int_distribution<int> coord(0, mp.n - 1);
    const double h = 1e-6;
    for (int p = 0; p < points; ++p) {
        Eigen::VectorXd m(mp.n);
        for (int i = 0; i < mp.n; ++i) m[i] = U(gen);
        const Eigen::VectorXd g = gradient(ctx, m);
        double num = 0.0, den = 0.0;
        for (int c = 0; c < 20; ++c) {
            const int i = coord(gen);
            Eigen::VectorXd mp_ = m, mm = m;
            mp_[i] += h;
            mm[i] -= h;
            const double fd = (free_energy(ctx, mp_) - free_energy(ctx, mm)) / (2 * h);
            num += (fd - g[i]) * (fd - g[i]);
            den += g[i] * g[i];
        }
        rep.grad_fd_rel = std::max(rep.grad_fd_rel, std::sqrt(num / den));

        Eigen::VectorXd v = normal_vector(gen, mp.n);
        v /= v.norm();
        const double hv = 1e-5;
        const double dg = (gradient(ctx, m + hv * v) - gradient(ctx, m - hv * v)).dot(v) / (2 * hv);
        const double a = hessian_quadratic_form(ctx, m, v), b = hessian_quadratic_form_split(ctx, m, v);
        rep.hess_fd_rel = std::max(rep.hess_fd_rel, std::abs(dg - a) / std::abs(a));
        rep.split_rel = std::max(rep.split_rel, std::abs(a - b) / std::abs(a));
        if (p == 0) {
            const Eigen::MatrixXd H1 = hessian_matrix(ctx, m), H2 = hessian_matrix_split(ctx, m);
            rep.matrix_split_rel = (H1 - H2).norm() / H1.norm();
        }
    }
    return rep;
}

// ---------------------------------------------------------------- reports

namespace {

struct Field {
    const char* name;
    std::function<double(const SeedRecord&)> get;
};

const std::vector<Field>& seed_fields()
{
    static const std::vector<Field> f{
        {"max_q_gap", [](const SeedRecord& r) { return r.max_q_gap; }},
        {"gg_gap", [](const SeedRecord& r) { return r.gg_gap; }},
        {"gg_gap_joint", [](const SeedRecord& r) { return r.gg_gap_joint; }},
        {"mm_gap", [](const SeedRecord& r) { return r.mm_gap; }},
        {"max_overlap_gap", [](const SeedRecord& r) { return r.max_overlap_gap; }},
        {"max_onsager_gap", [](const SeedRecord& r) { return r.max_onsager_gap; }},
        {"sliced_w2", [](const SeedRecord& r) { return r.sliced_w2; }},
        {"newton_converged", [](const SeedRecord& r) { return double(r.newton_converged); }},
        {"grad_norm", [](const SeedRecord& r) { return r.grad_norm; }},
        {"dist_from_center", [](const SeedRecord& r) { return r.dist_from_center; }},
        {"max_abs", [](const SeedRecord& r) { return r.max_abs; }},
        {"unique", [](const SeedRecord& r) { return double(r.unique); }},
        {"restart_pairwise_max", [](const SeedRecord& r) { return r.restart_pairwise_max; }},
        {"newton_steps", [](const SeedRecord& r) { return double(r.newton_steps); }},
        {"probe_min", [](const SeedRecord& r) { return r.probe_min; }},
        {"center_lambda_min", [](const SeedRecord& r) { return r.center_lambda_min; }},
        {"origin_lambda_min", [](const SeedRecord& r) { return r.origin_lambda_min; }},
        {"probe_count", [](const SeedRecord& r) { return double(r.probe_count); }},
        {"wr_residual", [](const SeedRecord& r) { return r.wr_residual; }},
        {"bdef_residual", [](const SeedRecord& r) { return r.bdef_residual; }},
        {"rts_asymmetry", [](const SeedRecord& r) { return r.rts_asymmetry; }},
        {"identity_residual", [](const SeedRecord& r) { return r.identity_residual; }},
        {"annihilation", [](const SeedRecord& r) { return r.annihilation; }},
        {"bsf_minus_b0_k", [](const SeedRecord& r) { return r.bsf_minus_b0_k; }},
        {"t_minus_tsf_k", [](const SeedRecord& r) { return r.t_minus_tsf_k; }},
        {"bsf_minus_b0", [](const SeedRecord& r) { return r.bsf_minus_b0; }},
        {"t_minus_tsf", [](const SeedRecord& r) { return r.t_minus_tsf; }},
        {"goe_sup", [](const SeedRecord& r) { return r.goe_sup; }},
        {"sf_upper_sup", [](const SeedRecord& r) { return r.sf_upper_sup; }},
        {"sf_lower_sup", [](const SeedRecord& r) { return r.sf_lower_sup; }},
        {"coupling_gap", [](const SeedRecord& r) { return r.coupling_gap; }},
    };
    return f;
}

// Stage -> fields it fills, so reports only carry what ran.
const std::map<std::string, std::vector<std::string>>& stage_fields()
{
    static const std::map<std::string, std::vector<std::string>> m{
        {"amp_se", {"max_q_gap", "gg_gap", "gg_gap_joint", "mm_gap", "max_overlap_gap", "max_onsager_gap", "sliced_w2"}},
        {"stationary",
         {"newton_converged", "grad_norm", "dist_from_center", "max_abs", "unique", "restart_pairwise_max",
          "newton_steps"}},
        {"probe", {"probe_min", "center_lambda_min", "origin_lambda_min", "probe_count"}},
        {"sf",
         {"wr_residual", "bdef_residual", "rts_asymmetry", "identity_residual", "annihilation", "bsf_minus_b0_k",
          "t_minus_tsf_k", "bsf_minus_b0", "t_minus_tsf"}},
        {"compare", {"goe_sup", "sf_upper_sup", "sf_lower_sup", "coupling_gap"}},
    };
    return m;
}

std::vector<std::string> active_fields(const Stages& st)
{
    std::vector<std::string> names;
    auto add = [&](const char* s) {
        for (const auto& f : stage_fields().at(s)) names.push_back(f);
    };
    if (st.amp_se) add("amp_se");
    if (st.stationary) add("stationary");
    if (st.probe) add("probe");
    if (st.sf) add("sf");
    if (st.compare) add("compare");
    return names;
}

const Field& field(const std::string& name)
{
    for (const auto& f : seed_fields())
        if (name == f.name) return f;
    throw InvariantError("unknown field " + name);
}

std::vector<double> column(const std::vector<SeedRecord>& recs, const std::string& name,
                           const char* stage = nullptr)
{
    std::vector<double> v;
    const Field& f = field(name);
    for (const auto& r : recs) {
        if (stage && r.errors.count(stage)) continue;
        v.push_back(f.get(r));
    }
    return v;
}

json seed_json(const SeedRecord& r, const std::vector<std::string>& names, bool timing)
{
    json j;
    j["seed"] = r.seed;
    for (const auto& n : names) j[n] = finite_or(field(n).get(r));
    if (!r.errors.empty()) j["errors"] = r.errors;
    if (timing) j["timing"] = r.timing;
    return j;
}

std::string seeds_csv(const std::vector<SeedRecord>& recs, const std::vector<std::string>& names)
{
    std::ostringstream os;
    os << std::setprecision(10) << "seed";
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    for (const auto& r : recs) {
        os << r.seed;
        for (const auto& n : names) os << ',' << field(n).get(r);
        os << '\n';
    }
    return os.str();
}

json header(const std::string& command, const ExperimentConfig& cfg)
{
    json j;
    j["tool"] = "tapscope";
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    if (cfg.record_timing) j["timestamp"] = timestamp_utc();
    j["goe_convention"] = kGoeConvention;
    j["quadrature_order"] = {
        {"base", cfg.quadrature_order},
        {"effective",
         order_for_variance(cfg.model.lambda * cfg.model.lambda + cfg.model.gamma0, cfg.quadrature_order)},
        {"nodes_per_unit_variance", kNodesPerUnitVariance}};
    j["config"] = config_json(cfg);
    return j;
}

void finish(CommandResult& out, json& j, const std::vector<Criterion>& crit, const ExperimentConfig& cfg,
            std::chrono::steady_clock::time_point t0)
{
    json cj = json::array();
    bool all = true;
    std::ostringstream sum;
    for (const auto& c : crit) {
        cj.push_back({{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        all = all && c.pass;
        sum << (c.pass ? "PASS " : "FAIL ") << c.id << ' ' << c.name << ": " << c.detail << '\n';
    }
    j["criteria"] = cj;
    j["pass"] = all;
    if (cfg.record_timing) j["timing"] = {{"wall_seconds", seconds_since(t0)}};
    out.exit_code = all ? kExitPass : kExitCriterion;
    out.json = j.dump(2);
    out.summary = sum.str();
}

std::string fmt(double v, int prec = 4)
{
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

double frac_if(const std::vector<SeedRecord>& recs, const std::function<bool(const SeedRecord&)>& f)
{
    if (recs.empty()) return 0.0;
    int c = 0;
    for (const auto& r : recs) c += f(r) ? 1 : 0;
    return double(c) / recs.size();
}

bool stage_ok(const SeedRecord& r, const char* s) { return r.errors.count(s) == 0; }

std::vector<double> alpha_grid(const MaxMinConfig& m)
{
    std::vector<double> g;
    const int steps = static_cast<int>(std::floor((m.alpha_v_max - m.alpha_v_min) / m.alpha_v_step + 1e-9));
    for (int i = 0; i <= steps; ++i) g.push_back(m.alpha_v_min + i * m.alpha_v_step);
    return g;
}

}  // namespace

Criterion crit_fixed_point(const FixedPointConstants& fp, double lambda)
{
    Criterion c{"1", "fixed-point identities", false, ""};
    const double l2q = lambda * lambda * (1.0 - fp.q_inf);
    c.pass = std::abs(fp.residual) <= 1e-10 && std::abs(fp.q_identity_residual) <= 1e-8 &&
             std::abs(fp.b_identity_residual) <= 1e-8 && l2q < 1.0;
    c.detail = "gamma residual " + fmt(fp.residual, 3) + ", q identity " + fmt(fp.q_identity_residual, 3) +
               ", b identity " + fmt(fp.b_identity_residual, 3) + ", lambda^2(1-q) " + fmt(l2q);
    return c;
}

Criterion crit_amp(const std::vector<SeedRecord>& recs)
{
    Criterion c{"2", "AMP-SE agreement", false, ""};
    auto q = column(recs, "max_q_gap", "amp_se"), g = column(recs, "gg_gap", "amp_se"),
         gj = column(recs, "gg_gap_joint", "amp_se");
    if (q.empty()) {
        c.detail = "no successful runs";
        return c;
    }
    const double mq = median(q), mg = median(g);
    c.pass = mq <= 0.05 && mg <= 0.1 && q.size() == recs.size();
    c.detail = "median max|Q-q| " + fmt(mq) + " (<= 0.05), median max|G'G/n - K| " + fmt(mg) +
               " (<= 0.1); against the recursion covariance " + fmt(median(gj));
    return c;
}

Criterion crit_sf_identities(const std::vector<SeedRecord>& recs)
{
    Criterion c{"3", "conditional-SF identities", false, ""};
    double wr = 0, bd = 0, id = 0;
    bool ok = !recs.empty();
    for (const auto& r : recs) {
        if (!stage_ok(r, "sf")) {
            ok = false;
            continue;
        }
        wr = std::max(wr, r.wr_residual);
        bd = std::max(bd, r.bdef_residual);
        id = std::max(id, r.identity_residual);
    }
    c.pass = ok && wr <= 1e-8 && bd <= 1e-8 && id <= 1e-8;
    c.detail = "max WR=S " + fmt(wr, 3) + ", B-def " + fmt(bd, 3) + ", reconstruction " + fmt(id, 3);
    return c;
}

Criterion crit_convexity(const std::vector<SeedRecord>& recs)
{
    Criterion c{"5", "local convexity", false, ""};
    const double fc = frac_if(recs, [](const SeedRecord& r) { return stage_ok(r, "probe") && r.probe_min > 0.0; });
    const double fo =
        frac_if(recs, [](const SeedRecord& r) { return stage_ok(r, "probe") && r.origin_lambda_min < 0.0; });
    c.pass = fc >= 0.95 && fo >= 0.95;
    auto pm = column(recs, "probe_min", "probe");
    c.detail = "probe min > 0 in " + fmt(100 * fc) + "% of seeds (median " + fmt(pm.empty() ? NAN : median(pm)) +
               "), origin lambda_min < 0 in " + fmt(100 * fo) + "%";
    return c;
}

Criterion crit_stationary(const std::vector<SeedRecord>& recs, double eps)
{
    Criterion c{"6", "unique stationary point", false, ""};
    const double f = frac_if(recs, [eps](const SeedRecord& r) {
        return stage_ok(r, "stationary") && r.newton_converged && r.grad_norm <= 1e-10 &&
               r.dist_from_center <= eps / 2 && r.max_abs < 1.0 && r.unique;
    });
    c.pass = f >= 0.95;
    c.detail = "all conditions met in " + fmt(100 * f) + "% of seeds";
    return c;
}

Criterion crit_dominance(const std::vector<SeedRecord>& recs)
{
    Criterion c{"9", "surrogate dominance", false, ""};
    const double fd = frac_if(
        recs, [](const SeedRecord& r) { return stage_ok(r, "compare") && r.sf_lower_sup >= r.goe_sup - 0.05; });
    const double fn = frac_if(recs, [](const SeedRecord& r) {
        return stage_ok(r, "compare") && r.sf_upper_sup < 0.0 && r.goe_sup < 0.0;
    });
    c.pass = fd >= 0.95 && fn >= 0.95;
    c.detail = "SF >= GOE - 0.05 in " + fmt(100 * fd) + "% of seeds, both negative in " + fmt(100 * fn) + "%";
    return c;
}

namespace {

json aggregate_json(const std::vector<SeedRecord>& recs, const std::vector<std::string>& names)
{
    json a;
    for (const auto& n : names) a[n] = summary_json(column(recs, n));
    return a;
}

struct MaxMinOutcome {
    json j;
    std::vector<Criterion> crit;
    std::string csv;
    std::string svg;
};

MaxMinOutcome maxmin_block(const ExperimentConfig& cfg)
{
    MaxMinOutcome o;
    const ScalarParams p = make_scalar_params(cfg.model.lambda, cfg.model.gamma0, cfg.model.variant,
                                              cfg.quadrature_order);
    const double L0 = L_value(MaxMinQuery{}, p);
    const auto ibp = ibp_identities(p);
    const SchurCertificate sc = schur_certificate(p);
    MarginOptions mo;
    mo.box = cfg.maxmin.box;
    mo.adaptive_box = cfg.maxmin.adaptive_box;
    mo.grid = cfg.maxmin.grid;
    const MarginResult mr = margin_search(p, alpha_grid(cfg.maxmin), mo);

    // closed-form Theta against a 1-d grid on random inputs
    auto gen = substream(cfg.seeds.front(), "theta-check");
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        MaxMinQuery q{0.9 * U(gen), 0.0, U(gen), U(gen), 0.5 * (U(gen) + 1.0) * 0.5};
        const double g = 1.5 * U(gen) * p.lambda * std::sqrt(p.q_inf), m = U(gen) * 0.99, xi = 1.5 * U(gen),
                     up = 0.9 * U(gen);
        const double cf = theta_closed_form(g, m, xi, up, q, p);
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 100000; ++i) best = std::max(best, theta_objective(-50.0 + 1e-3 * i, g, m, xi, up, q, p));
        const double curv = 1.0 / (1.0 - up * up) - q.alpha_v;
        worst = std::max(worst, (cf - best) / (curv * 2.5e-7 + 1e-12));
    }

    o.j["params"] = {{"lambda", p.lambda},  {"gamma0", p.gamma0},       {"chi", p.chi},
                     {"gamma_inf", p.gamma_inf}, {"q_inf", p.q_inf},     {"b_inf", p.b_inf},
                     {"order_g", p.order_g}, {"order_g0", p.order_g0}};
    o.j["L0"] = L0;
    o.j["ibp_residuals"] = ibp;
    o.j["schur"] = {{"c1", sc.c1},
                    {"c2", sc.c2},
                    {"c1_plus_q_c2", sc.schur},
                    {"expanded", sc.schur_expanded},
                    {"block_residual", sc.block_residual},
                    {"quadrature_block_residual", sc.quadrature_residual},
                    {"chain_ok", sc.chain_ok},
                    {"a22_positive", sc.a22_positive},
                    {"verdict", sc.verdict}};
    const AMatrices A0 = A_matrices(0.0, p);
    o.j["A0"] = {{"A11", matrix_json(A0.A11)}, {"A12", matrix_json(A0.A12)}, {"A22", matrix_json(A0.A22)}};
    json rows = json::array();
    std::ostringstream csv;
    csv << std::setprecision(10) << "alpha_v,L0,sup,margin,rho_star,u_star,alpha_rho_star,alpha_u_star,at_origin,box\n";
    Series s{"margin", {}, {}}, s0{"-L(0,0;0,0,alpha_v)", {}, {}};
    for (const auto& r : mr.rows) {
        rows.push_back({{"alpha_v", r.alpha_v},
                        {"L0", r.L0},
                        {"sup", r.sup},
                        {"margin", r.margin},
                        {"rho_star", r.rho_star},
                        {"u_star", r.u_star},
                        {"alpha_rho_star", r.alpha_rho_star},
                        {"alpha_u_star", r.alpha_u_star},
                        {"at_origin", r.at_origin},
                        {"inner_interior", r.inner_interior},
                        {"box", r.box}});
        csv << r.alpha_v << ',' << r.L0 << ',' << r.sup << ',' << r.margin << ',' << r.rho_star << ','
            << r.u_star << ',' << r.alpha_rho_star << ',' << r.alpha_u_star << ',' << int(r.at_origin) << ','
            << r.box << '\n';
        s.x.push_back(r.alpha_v);
        s.y.push_back(r.margin);
        s0.x.push_back(r.alpha_v);
        s0.y.push_back(-r.L0);
    }
    o.j["margin_table"] = rows;
    o.j["alpha_v_star"] = mr.alpha_v_star;
    o.j["margin_c"] = mr.margin_c;
    o.j["certificate"] = mr.success ? "ok" : "failure: no alpha_v with a positive margin attained at the origin";
    o.j["theta_check_worst_ratio"] = worst;
    o.csv = csv.str();
    o.svg = svg_line_plot("margin vs alpha_v", "alpha_v", "margin", {s, s0});

    Criterion c{"8", "scalar certificate", false, ""};
    const double ibpmax = *std::max_element(ibp.begin(), ibp.end());
    c.pass = std::abs(L0) <= 1e-10 && ibpmax <= 1e-7 && sc.verdict && sc.a22_positive && mr.success && worst <= 1.0;
    c.detail = "L0 " + fmt(L0, 3) + ", IBP max " + fmt(ibpmax, 3) + ", c2 " + fmt(sc.c2) + ", c1+q c2 " +
               fmt(sc.schur) + ", margin_c " + fmt(mr.margin_c) + " at alpha_v " + fmt(mr.alpha_v_star) +
               ", Theta check " + (worst <= 1.0 ? "ok" : "mismatch");
    o.crit.push_back(c);
    return o;
}

std::string gamma_csv(const SeCurve& c)
{
    std::ostringstream os;
    os << std::setprecision(12) << "s,gamma_s,q_s\n";
    for (std::size_t s = 0; s < c.gammas.size(); ++s) {
        os << s << ',' << c.gammas[s] << ',';
        if (s < c.overlaps.size()) os << c.overlaps[s];
        os << '\n';
    }
    return os.str();
}

void attach(CommandResult& out, const ExperimentConfig& cfg, const std::string& suffix, const std::string& ext,
            const std::string& content)
{
    if (std::find(cfg.formats.begin(), cfg.formats.end(), ext) == cfg.formats.end()) return;
    out.files[out.name + suffix + "." + ext] = content;
}

}  // namespace

SfTrend sf_trend(const ExperimentConfig& cfg, const std::vector<int>& ns, int max_seeds)
{
    SfTrend t;
    t.k = cfg.sf_k;
    t.ns = ns;
    for (int n : ns) {
        std::vector<double> b, tt;
        const std::size_t count = std::min<std::size_t>(max_seeds, cfg.seeds.size());
        for (std::size_t i = 0; i < count; ++i) {
            ModelParams mp = cfg.model;
            mp.n = n;
            try {
                ModelInstance inst = make_instance(mp, cfg.seeds[i]);
                ConditioningData cd = build_conditioning(run_amp_z2(inst, cfg.sf_k), inst);
                b.push_back(cd.bsf_minus_b0_op);
                tt.push_back(cd.t_minus_tsf_op);
            } catch (const std::exception&) {
            }
        }
        t.median_bsf_minus_b0.push_back(b.empty() ? NAN : median(b));
        t.median_t_minus_tsf.push_back(tt.empty() ? NAN : median(tt));
        t.runs.push_back(static_cast<int>(b.size()));
    }
    return t;
}

Criterion crit_sf_trend(const SfTrend& t)
{
    Criterion c{"4", "SF-object convergence trend", false, ""};
    const auto& mb = t.median_bsf_minus_b0;
    const auto& mt = t.median_t_minus_tsf;
    bool ok = !mb.empty();
    for (std::size_t i = 1; i < mb.size(); ++i) ok = ok && mb[i - 1] > mb[i] && mt[i - 1] > mt[i];
    c.pass = ok && mb.back() <= 0.1 && mt.back() <= 0.1;
    std::string b, tt;
    for (std::size_t i = 0; i < mb.size(); ++i) {
        b += (i ? " / " : "") + fmt(mb[i]);
        tt += (i ? " / " : "") + fmt(mt[i]);
    }
    c.detail = "k=" + std::to_string(t.k) + ", median ||B_SF-B0|| " + b + ", median ||T-T_SF|| " + tt;
    return c;
}

Criterion crit_numerics(const NumericsReport& nr)
{
    Criterion c{"7", "gradient/Hessian numerics", false, ""};
    c.pass = nr.grad_fd_rel <= 1e-6 && nr.split_rel <= 1e-10 && nr.matrix_split_rel <= 1e-10;
    c.detail = "n=" + std::to_string(nr.n) + ", FD gradient rel. error " + fmt(nr.grad_fd_rel, 3) +
               ", Hessian split residual " + fmt(std::max(nr.split_rel, nr.matrix_split_rel), 3) +
               ", gradient-vs-Hessian FD " + fmt(nr.hess_fd_rel, 3);
    return c;
}

Criterion crit_certificate(const ExperimentConfig& cfg) { return maxmin_block(cfg).crit.front(); }

CommandResult cmd_se(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    CommandResult out;
    out.name = "se";
    const ModelParams& m = cfg.model;
    const double c = chi(m.variant);
    const FixedPointConstants fp = solve_fixed_point(m.lambda, m.gamma0, c, cfg.quadrature_order);
    const SeCurve curve = run_recursion(m.lambda, m.gamma0, c, cfg.k, cfg.quadrature_order);

    json j = header("se", cfg);
    j["fixed_point"] = {{"gamma_inf", fp.gamma_inf},
                        {"q_inf", fp.q_inf},
                        {"b_inf", fp.b_inf},
                        {"K_inf", fp.K_inf},
                        {"residual", fp.residual},
                        {"q_identity_residual", fp.q_identity_residual},
                        {"b_identity_residual", fp.b_identity_residual},
                        {"iterations", fp.iterations},
                        {"used_bisection", fp.used_bisection},
                        {"quadrature_order", fp.quadrature_order}};
    j["curve"] = {{"gammas", curve.gammas},
                  {"overlaps", curve.overlaps},
                  {"K", matrix_json(curve.K)},
                  {"quadrature_order", curve.quadrature_order}};
    if (m.variant == Variant::FMM) j["curve"]["K_recursion"] = matrix_json(joint_covariance(curve));

    std::vector<Criterion> crit{crit_fixed_point(fp, m.lambda)};
    std::vector<double> xs;
    for (std::size_t s = 0; s < curve.gammas.size(); ++s) xs.push_back(double(s));
    attach(out, cfg, "", "csv", gamma_csv(curve));
    attach(out, cfg, "", "svg",
           svg_line_plot("gamma_s", "s", "gamma", {{"gamma_s", xs, curve.gammas},
                                                   {"gamma_inf", {xs.front(), xs.back()}, {fp.gamma_inf, fp.gamma_inf}}}));
    finish(out, j, crit, cfg, t0);
    return out;
}

namespace {

CommandResult seed_command(const std::string& name, const ExperimentConfig& cfg, const Stages& st,
                           const std::function<std::vector<Criterion>(const std::vector<SeedRecord>&)>& crit_fn)
{
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    CommandResult out;
    out.name = name;
    const std::vector<SeedRecord> recs = run_seeds(cfg, st);
    const std::vector<std::string> names = active_fields(st);
    json j = header(name, cfg);
    json per = json::array();
    for (const auto& r : recs) per.push_back(seed_json(r, names, cfg.record_timing));
    j["per_seed"] = per;
    j["aggregate"] = aggregate_json(recs, names);
    attach(out, cfg, "_seeds", "csv", seeds_csv(recs, names));
    finish(out, j, crit_fn(recs), cfg, t0);
    return out;
}

}  // namespace

CommandResult cmd_amp(const ExperimentConfig& cfg)
{
    Stages st{true, false, false, false, false};
    return seed_command("amp", cfg, st, [](const auto& r) { return std::vector<Criterion>{crit_amp(r)}; });
}

CommandResult cmd_tap_probe(const ExperimentConfig& cfg)
{
    Stages st{false, true, true, false, false};
    const double eps = cfg.epsilon;
    return seed_command("tap-probe", cfg, st, [eps](const auto& r) {
        return std::vector<Criterion>{crit_convexity(r), crit_stationary(r, eps)};
    });
}

CommandResult cmd_sf_verify(const ExperimentConfig& cfg)
{
    Stages st{false, false, false, true, true};
    return seed_command("sf-verify", cfg, st, [](const auto& r) {
        return std::vector<Criterion>{crit_sf_identities(r), crit_dominance(r)};
    });
}

CommandResult cmd_maxmin(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    CommandResult out;
    out.name = "maxmin";
    MaxMinOutcome o = maxmin_block(cfg);
    json j = header("maxmin", cfg);
    j["maxmin"] = o.j;
    attach(out, cfg, "", "csv", o.csv);
    attach(out, cfg, "", "svg", o.svg);
    finish(out, j, o.crit, cfg, t0);
    return out;
}

CommandResult cmd_full(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    CommandResult out;
    out.name = "full";
    const ModelParams& m = cfg.model;
    json j = header("full", cfg);
    std::vector<Criterion> crit;

    const FixedPointConstants fp = solve_fixed_point(m.lambda, m.gamma0, chi(m.variant), cfg.quadrature_order);
    j["fixed_point"] = {{"gamma_inf", fp.gamma_inf}, {"q_inf", fp.q_inf}, {"b_inf", fp.b_inf},
                        {"residual", fp.residual},   {"q_identity_residual", fp.q_identity_residual},
                        {"b_identity_residual", fp.b_identity_residual}};
    crit.push_back(crit_fixed_point(fp, m.lambda));

    const Stages st{};
    const std::vector<SeedRecord> recs = run_seeds(cfg, st);
    const std::vector<std::string> names = active_fields(st);
    json per = json::array();
    for (const auto& r : recs) per.push_back(seed_json(r, names, cfg.record_timing));
    j["per_seed"] = per;
    j["aggregate"] = aggregate_json(recs, names);
    crit.push_back(crit_amp(recs));
    crit.push_back(crit_sf_identities(recs));

    {
        const int n = m.n;
        const SfTrend tr = sf_trend(cfg, {std::max(50, n / 4), std::max(100, n / 2), n}, 10);
        json trend = json::array();
        for (std::size_t i = 0; i < tr.ns.size(); ++i)
            trend.push_back({{"n", tr.ns[i]}, {"median_bsf_minus_b0", finite_or(tr.median_bsf_minus_b0[i])},
                             {"median_t_minus_tsf", finite_or(tr.median_t_minus_tsf[i])}, {"runs", tr.runs[i]}});
        j["sf_trend"] = trend;
        crit.push_back(crit_sf_trend(tr));
    }

    crit.push_back(crit_convexity(recs));
    crit.push_back(crit_stationary(recs, cfg.epsilon));

    {
        const NumericsReport nr = numerics_check(m, cfg.seeds.front());
        j["numerics"] = {{"n", nr.n},
                         {"grad_fd_rel", nr.grad_fd_rel},
                         {"hess_fd_rel", nr.hess_fd_rel},
                         {"split_rel", nr.split_rel},
                         {"matrix_split_rel", nr.matrix_split_rel}};
        crit.push_back(crit_numerics(nr));
    }

    try {
        MaxMinOutcome o = maxmin_block(cfg);
        j["maxmin"] = o.j;
        crit.push_back(o.crit.front());
        attach(out, cfg, "_maxmin", "csv", o.csv);
        attach(out, cfg, "_maxmin", "svg", o.svg);
    } catch (const std::exception& e) {
        crit.push_back({"8", "scalar certificate", false, std::string("error: ") + e.what()});
    }
    crit.push_back(crit_dominance(recs));

    attach(out, cfg, "_seeds", "csv", seeds_csv(recs, names));
    finish(out, j, crit, cfg, t0);
    return out;
}

CommandResult cmd_sweep(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    CommandResult out;
    out.name = "sweep";
    const std::vector<double> lambdas = cfg.sweep.lambdas.empty() ? std::vector<double>{cfg.model.lambda}
                                                                  : cfg.sweep.lambdas;
    const std::vector<int> ns = cfg.sweep.ns.empty() ? std::vector<int>{cfg.model.n} : cfg.sweep.ns;
    json j = header("sweep", cfg);
    json rows = json::array();
    std::ostringstream csv;
    csv << std::setprecision(10)
        << "lambda,n,gamma_inf,q_inf,margin_c,median_probe_min,frac_convex,median_max_q_gap,frac_unique,error\n";
    Series sm{"median probe min", {}, {}};
    for (double lam : lambdas) {
        for (int n : ns) {
            ExperimentConfig c = cfg;
            c.model.lambda = lam;
            c.model.n = n;
            json row{{"lambda", lam}, {"n", n}};
            std::string err;
            double gi = NAN, qi = NAN, mc = NAN, pm = NAN, fc = NAN, mq = NAN, fu = NAN;
            try {
                c.validate();
                const FixedPointConstants fp =
                    solve_fixed_point(lam, c.model.gamma0, chi(c.model.variant), c.quadrature_order);
                gi = fp.gamma_inf;
                qi = fp.q_inf;
                MarginOptions mo;
                mo.box = c.maxmin.box;
                mo.adaptive_box = c.maxmin.adaptive_box;
                mo.grid = c.maxmin.grid;
                mc = margin_search(make_scalar_params(lam, c.model.gamma0, c.model.variant, c.quadrature_order),
                                   alpha_grid(c.maxmin), mo)
                         .margin_c;
                const std::vector<SeedRecord> recs = run_seeds(c, Stages{true, true, true, false, false});
                auto p = column(recs, "probe_min", "probe");
                auto q = column(recs, "max_q_gap", "amp_se");
                pm = p.empty() ? NAN : median(p);
                mq = q.empty() ? NAN : median(q);
                fc = frac_if(recs, [](const SeedRecord& r) { return stage_ok(r, "probe") && r.probe_min > 0; });
                fu = frac_if(recs, [](const SeedRecord& r) { return stage_ok(r, "stationary") && r.unique; });
            } catch (const std::exception& e) {
                err = e.what();
            }
            row["gamma_inf"] = finite_or(gi);
            row["q_inf"] = finite_or(qi);
            row["margin_c"] = finite_or(mc);
            row["median_probe_min"] = finite_or(pm);
            row["frac_convex"] = finite_or(fc);
            row["median_max_q_gap"] = finite_or(mq);
            row["frac_unique"] = finite_or(fu);
            if (!err.empty()) row["error"] = err;
            rows.push_back(row);
            csv << lam << ',' << n << ',' << gi << ',' << qi << ',' << mc << ',' << pm << ',' << fc << ',' << mq
                << ',' << fu << ",\"" << err << "\"\n";
            if (std::isfinite(pm)) {
                sm.x.push_back(ns.size() > 1 ? double(n) : lam);
                sm.y.push_back(pm);
            }
        }
    }
    j["rows"] = rows;
    attach(out, cfg, "", "csv", csv.str());
    attach(out, cfg, "", "svg", svg_line_plot("sweep", ns.size() > 1 ? "n" : "lambda", "median probe min", {sm}));
    finish(out, j, {}, cfg, t0);
    return out;
}

CommandResult run_command(const std::string& name, const ExperimentConfig& cfg)
{
    auto error_result = [&](int code, const char* kind, const std::string& msg) {
        CommandResult r;
        r.name = name;
        r.exit_code = code;
        json j{{"tool", "tapscope"}, {"command", name}, {"error", {{"kind", kind}, {"message", msg}}},
               {"goe_convention", kGoeConvention}};
        r.json = j.dump(2);
        r.summary = std::string(kind) + ": " + msg + "\n";
        return r;
    };
    try {
        if (name == "se") return cmd_se(cfg);
        if (name == "amp") return cmd_amp(cfg);
        if (name == "tap-probe") return cmd_tap_probe(cfg);
        if (name == "sf-verify") return cmd_sf_verify(cfg);
        if (name == "maxmin") return cmd_maxmin(cfg);
        if (name == "full") return cmd_full(cfg);
        if (name == "sweep") return cmd_sweep(cfg);
        return error_result(kExitRegime, "usage", "unknown command '" + name + "'");
    } catch (const RegimeError& e) {
        return error_result(kExitRegime, "regime", e.what());
    } catch (const DomainError& e) {
        return error_result(kExitRegime, "parameter", e.what());
    } catch (const IoError& e) {
        return error_result(kExitIo, "io", e.what());
    } catch (const InvariantError& e) {
        return error_result(kExitCriterion, "invariant", e.what());
    }
}

std::vector<std::string> write_outputs(const CommandResult& r, const ExperimentConfig& cfg)
{
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
    std::vector<std::string> written;
    auto put = [&](const std::string& file, const std::string& content) {
        const fs::path p = dir / file;
        std::ofstream o(p);
        if (!o) throw IoError("cannot write '" + p.string() + "'");
        o << content;
        if (content.empty() || content.back() != '\n') o << '\n';
        o.close();
        if (!o) throw IoError("write failed for '" + p.string() + "'");
        written.push_back(p.string());
    };
    put(r.name + ".json", r.json);
    for (const auto& [f, c] : r.files) put(f, c);
    return written;
}

std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series)
{
    const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1;
    if (!(y0 <= y1)) y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    auto X = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto Y = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

    std::ostringstream os;
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
        os << "<text x=\"" << X(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
           << xv << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << Y(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << yv
           << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
       << xlabel << "</text>\n";
    os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
       << (T + H - B) / 2 << ")\">" << ylabel << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        os << "<polyline fill=\"none\" stroke=\"" << colors[k % 5] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) os << X(s.x[i]) << ',' << Y(s.y[i]) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (k + 1) << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
           << colors[k % 5] << "\">" << s.name << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace tapscope

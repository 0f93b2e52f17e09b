// Acceptance run: one PASS/FAIL line per criterion, exit 0 only if all pass.
// Takes roughly 10-15 minutes on one core.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "tapscope/harness.hpp"
#include "tapscope/maxmin.hpp"
#include "tapscope/state_evolution.hpp"
#include "tapscope/stats.hpp"

using namespace tapscope;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

const Variant kVariants[] = {Variant::AMS, Variant::FMM};

ExperimentConfig base(Variant v, int n)
{
    ExperimentConfig c;
    c.model.variant = v;
    c.model.lambda = 1.5;
    c.model.gamma0 = 0.3;
    c.model.n = n;
    c.k = 12;
    c.epsilon = 0.05;
    c.probe_points = 50;
    c.restarts = 10;
    c.record_timing = false;
    c.seeds.clear();
    for (std::uint64_t s = 1; s <= 20; ++s) c.seeds.push_back(s);
    return c;
}

int failures = 0;

void report(const std::string& id, const std::string& name, bool pass, const std::string& detail, double secs)
{
    std::printf("%s %s %s: %s [%.1f s]\n", pass ? "PASS" : "FAIL", id.c_str(), name.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
    if (!pass) ++failures;
}

void info(const std::string& s)
{
    std::printf("  info: %s\n", s.c_str());
    std::fflush(stdout);
}

// Combines the per-variant verdicts of one criterion.
struct Joint {
    bool pass = true;
    std::string detail;
    void add(const char* tag, const Criterion& c)
    {
        pass = pass && c.pass;
        if (!detail.empty()) detail += "; ";
        detail += std::string(tag) + (c.pass ? "" : " (fail)") + ": " + c.detail;
    }
};

const char* tag(Variant v) { return v == Variant::AMS ? "AMS" : "FMM"; }

std::string num(double v)
{
    char b[32];
    std::snprintf(b, sizeof b, "%.4g", v);
    return b;
}

}  // namespace

int main()
{
    // 1: fixed-point identities on the scalar grid
    {
        const auto t0 = Clock::now();
        bool ok = true;
        double worst_g = 0, worst_q = 0, worst_b = 0;
        std::string bad;
        auto check = [&](double l, double g0, Variant v) {
            const FixedPointConstants fp = solve_fixed_point(l, g0, chi(v));
            const Criterion c = crit_fixed_point(fp, l);
            worst_g = std::max(worst_g, std::abs(fp.residual));
            worst_q = std::max(worst_q, std::abs(fp.q_identity_residual));
            worst_b = std::max(worst_b, std::abs(fp.b_identity_residual));
            if (!c.pass) {
                ok = false;
                bad += " " + std::string(tag(v)) + "(" + num(l) + "," + num(g0) + ")";
            }
        };
        for (double l : {1.1, 1.5, 2.0, 3.0}) check(l, 0.3, Variant::FMM);
        for (double l : {0.5, 0.9, 1.5})
            for (double g0 : {0.1, 0.3}) check(l, g0, Variant::AMS);
        const double secs = since(t0);
        report("1", "fixed-point identities", ok && secs < 1.0,
               "max gamma residual " + num(worst_g) + ", q identity " + num(worst_q) + ", b identity " +
                   num(worst_b) + (bad.empty() ? "" : ", failing:" + bad) + ", runtime < 1 s",
               secs);
    }

    // 2: AMP vs state evolution at n = 4000
    {
        const auto t0 = Clock::now();
        Joint j;
        for (Variant v : kVariants) {
            const ExperimentConfig c = base(v, 4000);
            const auto recs = run_seeds(c, Stages{true, false, false, false, false});
            j.add(tag(v), crit_amp(recs));
        }
        const double secs = since(t0);
        report("2", "AMP-SE agreement", j.pass && secs < 120.0, j.detail + ", runtime < 120 s", secs);
    }

    // 3: exact conditional identities on every trace
    {
        const auto t0 = Clock::now();
        Joint j;
        for (Variant v : kVariants) j.add(tag(v), crit_sf_identities(run_seeds(base(v, 2000), Stages{false, false, false, true, false})));
        const double secs = since(t0);
        report("3", "conditional-SF identities", j.pass && secs < 30.0, j.detail + ", runtime < 30 s", secs);
    }

    // 4: SF objects shrink with n
    {
        const auto t0 = Clock::now();
        Joint j;
        for (Variant v : kVariants) {
            ExperimentConfig c = base(v, 2000);
            c.sf_k = 3;
            j.add(tag(v), crit_sf_trend(sf_trend(c, {500, 1000, 2000}, 10)));
        }
        report("4", "SF-object convergence trend", j.pass, j.detail, since(t0));
        for (Variant v : kVariants) {
            ExperimentConfig c = base(v, 2000);
            c.sf_k = 3;
            c.seeds.clear();
            for (std::uint64_t s = 1; s <= 60; ++s) c.seeds.push_back(s);
            info(std::string(tag(v)) + " over 60 seeds: " + crit_sf_trend(sf_trend(c, {500, 1000, 2000}, 60)).detail);
        }
        for (Variant v : kVariants) {
            ExperimentConfig c = base(v, 2000);
            c.sf_k = 12;
            info(std::string(tag(v)) + " at k=12: " + crit_sf_trend(sf_trend(c, {500, 1000, 2000}, 10)).detail);
        }
    }

    // 5, 6, 9 share the n = 2000 runs
    {
        const auto t0 = Clock::now();
        Joint j5, j6, j9, j3;
        for (Variant v : kVariants) {
            const ExperimentConfig c = base(v, 2000);
            const auto recs = run_seeds(c, Stages{false, true, true, true, true});
            j5.add(tag(v), crit_convexity(recs));
            j6.add(tag(v), crit_stationary(recs, c.epsilon));
            j9.add(tag(v), crit_dominance(recs));
            j3.add(tag(v), crit_sf_identities(recs));
            double probe = 0;
            for (const auto& r : recs) probe += r.timing.count("probe") ? r.timing.at("probe") : 0.0;
            info(std::string(tag(v)) + " probe time " + num(probe) + " s over " + std::to_string(recs.size()) +
                 " seeds");
        }
        const double secs = since(t0);
        report("5", "local convexity", j5.pass && secs < 900.0, j5.detail + ", runtime < 900 s", secs);
        report("6", "unique stationary point", j6.pass, j6.detail, secs);
        report("9", "surrogate dominance", j9.pass, j9.detail, secs);
        info("SF identities on the same traces: " + j3.detail);
    }

    // 7: gradient / Hessian numerics
    {
        const auto t0 = Clock::now();
        Joint j;
        for (Variant v : kVariants) j.add(tag(v), crit_numerics(numerics_check(base(v, 2000).model, 1)));
        report("7", "gradient/Hessian numerics", j.pass, j.detail, since(t0));
    }

    // 8: scalar certificate over both lambda grids
    {
        const auto t0 = Clock::now();
        bool ok = true;
        std::string bad;
        double worst_l0 = 0, worst_margin = 1e300;
        auto run = [&](double l, double g0, Variant v) {
            ExperimentConfig c = base(v, 2000);
            c.model.lambda = l;
            c.model.gamma0 = g0;
            const Criterion cr = crit_certificate(c);
            const ScalarParams p = make_scalar_params(l, g0, v);
            const SchurCertificate sc = schur_certificate(p);
            worst_l0 = std::max(worst_l0, std::abs(L_value(MaxMinQuery{}, p)));
            const bool agree = sc.block_residual <= 1e-8;
            if (!cr.pass || !agree) {
                ok = false;
                bad += " " + std::string(tag(v)) + "(" + num(l) + "," + num(g0) + ")";
            }
            const std::size_t at = cr.detail.find("margin_c ");
            if (at != std::string::npos) worst_margin = std::min(worst_margin, std::stod(cr.detail.substr(at + 9)));
        };
        for (double l : {1.1, 1.25, 1.5, 2.0, 3.0}) run(l, 0.3, Variant::FMM);
        run(1.5, 0.1, Variant::FMM);
        for (double l : {0.3, 0.5, 0.75, 0.9, 1.2}) run(l, 0.3, Variant::AMS);
        const double secs = since(t0);
        report("8", "scalar certificate", ok && secs < 60.0,
               "11 parameter sets, max |L(0,0;0,0,0)| " + num(worst_l0) + ", smallest margin_c " + num(worst_margin) +
                   (bad.empty() ? "" : ", failing:" + bad) + ", runtime < 60 s",
               secs);
    }

    std::printf("%s: %d criterion failure(s)\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}

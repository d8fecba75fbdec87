// SPDX-License-Identifier: Apache-2.0

#include "unncsi/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "byte_io.hpp"
#include "format.hpp"
#include "pool.hpp"
#include "unncsi/baselines.hpp"
#include "unncsi/codec.hpp"
#include "unncsi/multiuser.hpp"
#include "unncsi/rng.hpp"
#include "unncsi/sweep.hpp"

namespace unncsi {

namespace fs = std::filesystem;
using detail::format_double;

Mode mode_from_string(const std::string &s)
{
    if (s == "single")
        return Mode::single;
    if (s == "transfer")
        return Mode::transfer;
    if (s == "group")
        return Mode::group;
    if (s == "codec")
        return Mode::codec;
    if (s == "sweep")
        return Mode::sweep;
    throw std::invalid_argument("unknown mode '" + s + "' (single, transfer, group, codec, sweep)");
}

std::string to_string(Mode m)
{
    switch (m) {
    case Mode::single:
        return "single";
    case Mode::transfer:
        return "transfer";
    case Mode::group:
        return "group";
    case Mode::codec:
        return "codec";
    case Mode::sweep:
        return "sweep";
    }
    return "?";
}

Profile profile_from_string(const std::string &s)
{
    if (s == "desk")
        return Profile::desk;
    if (s == "paper")
        return Profile::paper;
    throw std::invalid_argument("unknown profile '" + s + "' (desk, paper)");
}

std::string to_string(Profile p) { return p == Profile::desk ? "desk" : "paper"; }

FitConfig ExperimentConfig::effective_fit() const { return fit_config_from_json(fit_overrides, profile_fit(profile)); }

// ---------------------------------------------------------------------------
// Profiles

Scene profile_scene(const Scene &scene, Profile profile)
{
    if (profile == Profile::paper)
        return scene;
    Scene s = scene;
    const double df = scene.subcarrier_spacing();
    s.n_sub = 16;
    s.n_sp = 16;
    s.ura.rows = std::min<std::size_t>(2, scene.ura.rows);
    s.ura.cols = std::min<std::size_t>(2, scene.ura.cols);
    s.bandwidth_hz = df * static_cast<double>(s.n_sub);
    return s;
}

DecoderSpec profile_decoder(Profile profile, const Scene &g, SeedRule rule)
{
    if (profile == Profile::desk)
        return DecoderSpec::single_ue(g.n_sub, g.n_sp, g.n_ant(), 32, 3, 1, rule);
    return DecoderSpec::single_ue(g.n_sub, g.n_sp, g.n_ant(), 64, 4, 1, rule);
}

DecoderSpec profile_group_decoder(Profile profile, const Scene &g, std::size_t m, std::size_t preoutput, SeedRule rule)
{
    if (profile == Profile::desk)
        return DecoderSpec::multi_user(g.n_sp, g.n_sub, m, g.n_ant(), 32, 3, preoutput, false, rule);
    return DecoderSpec::multi_user(g.n_sp, g.n_sub, m, g.n_ant(), 64, 4, preoutput, false, rule);
}

FitConfig profile_fit(Profile profile)
{
    FitConfig c;
    c.iterations = profile == Profile::desk ? 3000 : 25000;
    c.trace_period = profile == Profile::desk ? 100 : 500;
    return c;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

fs::path resolve(const fs::path &base, const std::string &p)
{
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
}

std::vector<TransferPlan> plans_from_json(const nlohmann::json &j)
{
    const auto &arr = j.is_object() ? j.at("plans") : j;
    std::vector<TransferPlan> out;
    for (const auto &p : arr)
        out.push_back(transfer_plan_from_json(p));
    return out;
}

nlohmann::json read_json(const fs::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

} // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json &j, const fs::path &base)
{
    ExperimentConfig c;
    if (j.contains("scene"))
        c.scene_path = resolve(base, j.at("scene").get<std::string>());
    if (j.contains("decoder"))
        c.decoder_path = resolve(base, j.at("decoder").get<std::string>());
    if (j.contains("profile"))
        c.profile = profile_from_string(j.at("profile").get<std::string>());
    if (j.contains("mode"))
        c.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("fit"))
        c.fit_overrides = j.at("fit");
    if (j.contains("snr_db")) {
        c.snrs_db.clear();
        for (const auto &v : j.at("snr_db"))
            c.snrs_db.push_back(v.is_string() && v.get<std::string>() == "inf" ? INFINITY : v.get<double>());
    }
    c.ues = j.value("ues", c.ues);
    c.seeds = j.value("seeds", c.seeds);
    c.estimators = j.value("estimators", c.estimators);
    if (j.contains("plans")) {
        const auto &p = j.at("plans");
        c.plans = plans_from_json(p.is_string() ? read_json(resolve(base, p.get<std::string>())) : p);
    }
    for (const auto &g : j.value("groups", nlohmann::json::array())) {
        GroupSpec s;
        s.id = g.at("id").get<std::string>();
        s.ues = g.at("ues").get<std::vector<int>>();
        s.preoutput_layers = g.value("preoutput_layers", std::size_t{1});
        if (g.contains("iterations"))
            s.iterations = g.at("iterations").get<std::size_t>();
        c.groups.push_back(std::move(s));
    }
    if (j.contains("out"))
        c.out = resolve(base, j.at("out").get<std::string>());
    c.workers = j.value("workers", c.workers);
    c.write_tensors = j.value("write_tensors", c.write_tensors);
    if (j.contains("seed_rule")) {
        c.seed_rule.seed = j.at("seed_rule").value("seed", c.seed_rule.seed);
        c.seed_rule.half_range = j.at("seed_rule").value("half_range", c.seed_rule.half_range);
    }
    return c;
}

ExperimentConfig load_experiment_config(const fs::path &path)
{
    return experiment_config_from_json(read_json(path), path.parent_path().empty() ? "." : path.parent_path());
}

nlohmann::json to_json(const ExperimentConfig &c)
{
    nlohmann::json snrs = nlohmann::json::array();
    for (double s : c.snrs_db)
        snrs.push_back(std::isfinite(s) ? nlohmann::json(s) : nlohmann::json("inf"));
    nlohmann::json plans = nlohmann::json::array();
    for (const auto &p : c.plans)
        plans.push_back(to_json(p));
    nlohmann::json groups = nlohmann::json::array();
    for (const auto &g : c.groups) {
        nlohmann::json o{{"id", g.id}, {"ues", g.ues}, {"preoutput_layers", g.preoutput_layers}};
        if (g.iterations)
            o["iterations"] = *g.iterations;
        groups.push_back(o);
    }
    nlohmann::json j{{"scene", c.scene_path.string()},
                     {"profile", to_string(c.profile)},
                     {"mode", to_string(c.mode)},
                     {"fit", to_json(c.effective_fit())},
                     {"snr_db", snrs},
                     {"ues", c.ues},
                     {"seeds", c.seeds},
                     {"estimators", c.estimators},
                     {"plans", plans},
                     {"groups", groups},
                     {"out", c.out.string()},
                     {"workers", c.workers},
                     {"write_tensors", c.write_tensors},
                     {"seed_rule", {{"seed", c.seed_rule.seed}, {"half_range", c.seed_rule.half_range}}}};
    if (c.decoder_path)
        j["decoder"] = c.decoder_path->string();
    return j;
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Diagnostic> validate_decoder(const DecoderSpec &spec, std::size_t n_sub, std::size_t n_sp,
                                         std::size_t n_ant, std::size_t m)
{
    std::vector<Diagnostic> d;
    auto error = [&](std::string msg) { d.push_back({Diagnostic::Level::error, std::move(msg)}); };
    try {
        spec.check();
    } catch (const SpecError &e) {
        error(e.what());
        return d;
    }
    const Shape grid = m > 0 ? Shape{n_sp, n_sub, m} : Shape{n_sub, n_sp};
    const char *names3[] = {"N_sp", "N_sub", "M"};
    const char *names2[] = {"N_sub", "N_sp"};
    if (spec.spatial_rank() != grid.size()) {
        error("decoder has " + std::to_string(spec.spatial_rank()) + " spatial modes, grid needs " +
              std::to_string(grid.size()));
        return d;
    }
    for (std::size_t mode = 0; mode < grid.size(); ++mode) {
        std::size_t factor = 1;
        for (std::size_t l = 0; l < spec.inner_layers; ++l)
            if (spec.upsample[l][mode])
                factor *= 2;
        const std::string name = m > 0 ? names3[mode] : names2[mode];
        if (grid[mode] % factor != 0)
            error(name + "=" + std::to_string(grid[mode]) + " is not divisible by " + std::to_string(factor));
        else if (spec.output_spatial()[mode] != grid[mode])
            error("decoder output extent " + std::to_string(spec.output_spatial()[mode]) + " does not match " + name +
                  "=" + std::to_string(grid[mode]));
    }
    if (spec.output_width() != 2 * n_ant)
        error("output width must be " + std::to_string(2 * n_ant) + " (2 N_ant), got " +
              std::to_string(spec.output_width()));
    const std::size_t targets = 2 * n_sub * n_sp * n_ant * std::max<std::size_t>(m, 1);
    if (param_count(spec) >= targets)
        d.push_back({Diagnostic::Level::warning, "decoder has " + std::to_string(param_count(spec)) +
                                                     " parameters for " + std::to_string(targets) +
                                                     " real target values and is not under-parameterised"});
    return d;
}

bool has_errors(const std::vector<Diagnostic> &diagnostics)
{
    return std::any_of(diagnostics.begin(), diagnostics.end(),
                       [](const Diagnostic &x) { return x.level == Diagnostic::Level::error; });
}

namespace {

DecoderSpec load_decoder(const ExperimentConfig &c, const Scene &grid)
{
    if (c.decoder_path)
        return decoder_spec_from_json(read_json(*c.decoder_path));
    return profile_decoder(c.profile, grid, c.seed_rule);
}

std::vector<int> selected_ues(const ExperimentConfig &c, const Scene &s)
{
    return c.ues.empty() ? s.ue_ids() : c.ues;
}

std::vector<GroupSpec> effective_groups(const ExperimentConfig &c)
{
    if (!c.groups.empty())
        return c.groups;
    if (c.profile == Profile::desk)
        return {{"A", {2, 3, 4}, 1, std::nullopt}};
    return {{"A", {2, 3, 4}, 1, std::nullopt}, {"B", {2, 3, 4}, 2, std::nullopt}};
}

} // namespace

std::vector<Diagnostic> validate(const ExperimentConfig &c)
{
    std::vector<Diagnostic> d;
    auto error = [&](std::string msg) { d.push_back({Diagnostic::Level::error, std::move(msg)}); };
    if (c.snrs_db.empty())
        error("snr list is empty");
    if (c.seeds.empty())
        error("seed list is empty");
    try {
        (void)c.effective_fit();
    } catch (const std::exception &e) {
        error(std::string("fit config: ") + e.what());
    }
    if (!fs::exists(c.scene_path)) {
        error("scene file " + c.scene_path.string() + " does not exist");
        return d;
    }
    if (c.decoder_path && !fs::exists(*c.decoder_path)) {
        error("decoder file " + c.decoder_path->string() + " does not exist");
        return d;
    }
    Scene grid;
    try {
        grid = profile_scene(load_scene(c.scene_path), c.profile);
    } catch (const std::exception &e) {
        error(std::string("scene: ") + e.what());
        return d;
    }
    const auto ids = grid.ue_ids();
    auto known = [&](int ue) { return std::find(ids.begin(), ids.end(), ue) != ids.end(); };
    for (int ue : c.ues)
        if (!known(ue))
            error("UE " + std::to_string(ue) + " is not in the scene");
    for (const auto &e : c.estimators)
        if (std::find(kEstimators.begin(), kEstimators.end(), e) == kEstimators.end())
            error("unknown estimator '" + e + "'");

    if (c.mode == Mode::group) {
        for (const auto &g : effective_groups(c)) {
            for (int ue : g.ues)
                if (!known(ue))
                    error("group " + g.id + ": UE " + std::to_string(ue) + " is not in the scene");
            const auto spec = profile_group_decoder(c.profile, grid, g.ues.size(), g.preoutput_layers, c.seed_rule);
            for (auto x : validate_decoder(spec, grid.n_sub, grid.n_sp, grid.n_ant(), g.ues.size())) {
                x.message = "group " + g.id + ": " + x.message;
                d.push_back(std::move(x));
            }
        }
        return d;
    }
    try {
        for (auto &x : validate_decoder(load_decoder(c, grid), grid.n_sub, grid.n_sp, grid.n_ant()))
            d.push_back(std::move(x));
    } catch (const std::exception &e) {
        error(std::string("decoder: ") + e.what());
    }
    if (c.mode == Mode::transfer) {
        if (c.plans.empty())
            error("transfer mode needs at least one plan");
        for (const auto &p : c.plans)
            for (int ue : p.ues())
                if (!known(ue))
                    error("plan " + p.name + ": UE " + std::to_string(ue) + " is not in the scene");
    }
    return d;
}

// ---------------------------------------------------------------------------
// Running

namespace {

std::string snr_label(double snr) { return std::isfinite(snr) ? format_double(snr) : std::string("inf"); }

std::string nan_or(double v, bool ok) { return ok ? format_double(v) : std::string("nan"); }

void write_text(const fs::path &path, const std::string &text)
{
    detail::write_file_atomic(path.string(), std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

std::string cell_tag(int ue, double snr, std::uint64_t seed)
{
    return "ue" + std::to_string(ue) + "_snr" + snr_label(snr) + "_seed" + std::to_string(seed);
}

struct RunContext {
    const ExperimentConfig &config;
    Scene grid;
    DecoderSpec spec;
    FitConfig fit;
    std::vector<int> ues;
    std::map<int, ChannelTensor> truths;
    fs::path out;
    nlohmann::json summary;
    std::size_t diverged = 0;
};

ChannelTensor measure(const RunContext &ctx, int ue, double snr, std::uint64_t seed)
{
    return add_noise(ctx.truths.at(ue), snr, noise_seed(seed, ue, snr));
}

struct SingleCell {
    int ue;
    double snr;
    std::uint64_t seed;
};

std::vector<SingleCell> single_cells(const RunContext &ctx)
{
    std::vector<SingleCell> cells;
    for (int ue : ctx.ues)
        for (double snr : ctx.config.snrs_db)
            for (auto seed : ctx.config.seeds)
                cells.push_back({ue, snr, seed});
    return cells;
}

// Shared by single and codec modes: fit one cell, write its trace and report.
struct FittedCell {
    bool ok = false;
    double meas_db = 0.0;
    double est_db = 0.0;
    FitReport report;
    PreprocessedTarget target;
    ChannelTensor estimate;
    CsiReport csir;
};

FittedCell fit_cell(RunContext &ctx, const SingleCell &c, const std::string &prefix)
{
    FittedCell r;
    const auto meas = measure(ctx, c.ue, c.snr, c.seed);
    const auto &truth = ctx.truths.at(c.ue);
    r.meas_db = nmse_db(meas, truth);
    r.target = preprocess(meas);
    FitConfig cfg = ctx.fit;
    cfg.init_seed = cell_init_seed(ctx.fit.init_seed, c.ue, c.seed);
    const auto z0 = generate_seed(ctx.spec).as<float>();
    const std::string tag = prefix + "_" + cell_tag(c.ue, c.snr, c.seed);
    try {
        r.report = fit(ctx.spec, z0, to_float(r.target.data), cfg);
    } catch (const FitDiverged &) {
        return r;
    }
    r.ok = true;
    r.estimate = postprocess(forward(ctx.spec, r.report.params, z0, cfg.backend), r.target.norms, r.target.scale);
    r.est_db = nmse_db(r.estimate, truth);
    r.csir = {ctx.spec, r.report.params, {{r.target.norms, r.target.scale}}};
    write_text(ctx.out / "fit_traces" / (tag + ".csv"), trace_csv(r.report));
    write_report(ctx.out / "reports" / (tag + ".csir"), r.csir);
    if (ctx.config.write_tensors) {
        write_tensor(ctx.out / "tensors" / (tag + "_measured.csit"), meas.data);
        write_tensor(ctx.out / "tensors" / (tag + "_estimate.csit"), r.estimate.data);
    }
    return r;
}

void run_single(RunContext &ctx)
{
    const auto cells = single_cells(ctx);
    std::vector<std::string> rows(cells.size());
    std::vector<char> ok(cells.size());
    detail::parallel_for(cells.size(), ctx.config.workers, [&](std::size_t i) {
        const auto &c = cells[i];
        const auto r = fit_cell(ctx, c, "single");
        ok[i] = r.ok;
        std::ostringstream os;
        os << c.ue << ',' << snr_label(c.snr) << ',' << c.seed << ',' << (r.ok ? "ok" : "diverged") << ','
           << format_double(r.meas_db) << ',' << nan_or(r.est_db, r.ok) << ','
           << nan_or(r.meas_db - r.est_db, r.ok) << ',' << nan_or(r.report.final_mse, r.ok) << ','
           << r.report.iterations << ',' << param_count(ctx.spec) << '\n';
        rows[i] = os.str();
    });
    std::string csv = "ue,snr_db,seed,status,nmse_meas_db,nmse_est_db,gain_db,final_mse,iterations,param_count\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        csv += rows[i];
        ctx.diverged += ok[i] ? 0 : 1;
    }
    write_text(ctx.out / "results.csv", csv);
    ctx.summary["cells"] = cells.size();
}

void run_codec(RunContext &ctx)
{
    const auto cells = single_cells(ctx);
    std::vector<std::string> rows(cells.size());
    std::vector<FittedCell> fitted(cells.size());
    const std::size_t coeffs = ctx.grid.n_sub * ctx.grid.n_sp * ctx.grid.n_ant();
    detail::parallel_for(cells.size(), ctx.config.workers, [&](std::size_t i) {
        const auto &c = cells[i];
        auto r = fit_cell(ctx, c, "codec");
        std::ostringstream os;
        os << c.ue << ',' << snr_label(c.snr) << ',' << c.seed << ',' << (r.ok ? "ok" : "diverged") << ','
           << param_count(ctx.spec) << ',';
        if (r.ok) {
            const auto bytes = encode(r.csir);
            const auto rx = reconstruct(decode(bytes), ctx.fit.backend).front();
            const bool exact = rx.data == r.estimate.data;
            os << 4 * r.csir.params.size() << ',' << bytes.size() << ',' << coeffs * 8 << ','
               << format_double(static_cast<double>(bytes.size()) / static_cast<double>(coeffs * 8)) << ','
               << format_double(r.est_db) << ',' << format_double(nmse_db(rx, ctx.truths.at(c.ue))) << ','
               << (exact ? "true" : "false") << '\n';
        } else {
            os << "nan,nan," << coeffs * 8 << ",nan,nan,nan,false\n";
        }
        rows[i] = os.str();
        fitted[i] = std::move(r);
    });
    std::string csv = "ue,snr_db,seed,status,param_count,payload_bytes,report_bytes,raw_csi_bytes,size_ratio,"
                      "nmse_tx_db,nmse_rx_db,bit_exact\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        csv += rows[i];
        ctx.diverged += fitted[i].ok ? 0 : 1;
    }
    write_text(ctx.out / "results.csv", csv);

    // Update cost between neighbouring UEs at the same SNR and seed.
    std::string deltas = "snr_db,seed,ue_from,ue_to,mean_abs_delta,zero_deltas,parameters,entropy_bits\n";
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (std::size_t k = i + 1; k < cells.size(); ++k) {
            const auto &a = cells[i], &b = cells[k];
            if (a.snr != b.snr || a.seed != b.seed || !fitted[i].ok || !fitted[k].ok)
                continue;
            const auto s = weight_delta_stats(fitted[i].csir, fitted[k].csir);
            deltas += snr_label(a.snr) + ',' + std::to_string(a.seed) + ',' + std::to_string(a.ue) + ',' +
                      std::to_string(b.ue) + ',' + format_double(s.mean_abs_delta) + ',' +
                      std::to_string(s.zero_deltas) + ',' + std::to_string(s.parameters) + ',' +
                      format_double(s.entropy_bits) + '\n';
            break;
        }
    write_text(ctx.out / "deltas.csv", deltas);
    ctx.summary["cells"] = cells.size();
    ctx.summary["payload_bytes"] = 4 * param_count(ctx.spec);
}

void run_sweep_mode(RunContext &ctx)
{
    SweepSetup s{ctx.grid, ctx.spec, ctx.fit, ctx.config.estimators, ctx.ues, ctx.config.snrs_db, ctx.config.seeds,
                 ctx.config.workers};
    const auto cells = run_sweep_cells(s);
    for (const auto &c : cells) {
        if (c.estimator != "unn")
            continue;
        if (c.fit)
            write_text(ctx.out / "fit_traces" / ("sweep_" + cell_tag(c.ue, c.snr_db, c.seed) + ".csv"),
                       trace_csv(*c.fit));
        else
            ++ctx.diverged;
    }
    const auto records = aggregate(cells);
    write_text(ctx.out / "results.csv", eval_csv(records));
    write_text(ctx.out / "curves.json", curves_json(records).dump(2) + "\n");
    ctx.summary["cells"] = cells.size();
}

void run_transfer_mode(RunContext &ctx)
{
    struct Cell {
        const TransferPlan *plan;
        double snr;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto &p : ctx.config.plans)
        for (double snr : ctx.config.snrs_db)
            for (auto seed : ctx.config.seeds)
                cells.push_back({&p, snr, seed});

    std::vector<std::string> rows(cells.size()), dist_rows(cells.size());
    std::vector<std::size_t> failures(cells.size(), 0);
    const auto z0 = generate_seed(ctx.spec).as<float>();
    detail::parallel_for(cells.size(), ctx.config.workers, [&](std::size_t i) {
        const auto &c = cells[i];
        const auto &plan = *c.plan;
        std::map<int, UeData> data;
        for (int ue : plan.ues()) {
            auto meas = measure(ctx, ue, c.snr, c.seed);
            data.emplace(ue, UeData{preprocess(meas), ctx.truths.at(ue)});
        }
        FitConfig cfg = ctx.fit;
        cfg.init_seed = derive_seed(ctx.fit.init_seed, {static_cast<std::int64_t>(c.seed)});
        std::ostringstream os, ds;
        const std::string where = plan.name + "," ;
        std::map<int, TransferResult> tl;
        try {
            tl = run_transfer(plan, ctx.spec, cfg, data, 1);
        } catch (const FitDiverged &) {
            ++failures[i];
            for (int ue : plan.ues())
                os << where << ue << ",,transfer," << snr_label(c.snr) << ',' << c.seed << ",diverged,nan,nan,0\n";
            rows[i] = os.str();
            return;
        }
        auto row = [&](int ue, const std::string &from, const std::string &kind, bool ok, double nmse, double mse,
                       std::size_t iters) {
            os << where << ue << ',' << from << ',' << kind << ',' << snr_label(c.snr) << ',' << c.seed << ','
               << (ok ? "ok" : "diverged") << ',' << nan_or(nmse, ok) << ',' << nan_or(mse, ok) << ',' << iters
               << '\n';
        };
        for (int ue : plan.ues()) {
            const auto &r = tl.at(ue);
            const bool warm = r.init_from != kRandomInit;
            row(ue, warm ? std::to_string(r.init_from) : "random", warm ? "transfer" : "random", true, r.nmse_db,
                r.report.final_mse, r.report.iterations);
            std::string tag = "transfer_" + plan.name + "_" + cell_tag(ue, c.snr, c.seed);
            write_text(ctx.out / "fit_traces" / (tag + ".csv"), trace_csv(r.report));
            write_report(ctx.out / "reports" / (tag + ".csir"),
                         {ctx.spec, r.report.params, {{data.at(ue).target.norms, data.at(ue).target.scale}}});
        }
        // Random-start counterparts of the warm-started entries.
        for (const auto &step : plan.chain) {
            if (step.init_from == kRandomInit)
                continue;
            const auto &d = data.at(step.target_ue);
            FitConfig rc = cfg;
            rc.init_seed = ue_init_seed(cfg.init_seed, step.target_ue);
            const auto &reference = tl.at(step.init_from).report.params;
            const auto &warm = tl.at(step.target_ue).report.params;
            auto dist_rows_for = [&](const ParamSet<float> &p, const char *kind) {
                const auto wd = weight_distance(reference, p);
                for (std::size_t l = 0; l < wd.per_layer.size(); ++l)
                    ds << plan.name << ',' << step.target_ue << ',' << step.init_from << ',' << l + 1 << ','
                       << format_double(wd.per_layer[l]) << ',' << kind << ',' << snr_label(c.snr) << ','
                       << c.seed << '\n';
            };
            dist_rows_for(warm, "transfer");
            try {
                const auto rr = fit(ctx.spec, z0, to_float(d.target.data), rc);
                const auto est =
                    postprocess(forward(ctx.spec, rr.params, z0, rc.backend), d.target.norms, d.target.scale);
                row(step.target_ue, "random", "random", true, nmse_db(est, d.truth), rr.final_mse, rr.iterations);
                dist_rows_for(rr.params, "random");
            } catch (const FitDiverged &) {
                ++failures[i];
                row(step.target_ue, "random", "random", false, 0.0, 0.0, 0);
            }
        }
        rows[i] = os.str();
        dist_rows[i] = ds.str();
    });
    std::string csv = "plan,ue,init_from,init_kind,snr_db,seed,status,nmse_db,final_mse,iterations\n";
    std::string dist = "plan,ue,reference_ue,layer,distance,init_kind,snr_db,seed\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        csv += rows[i];
        dist += dist_rows[i];
        ctx.diverged += failures[i];
    }
    write_text(ctx.out / "results.csv", csv);
    write_text(ctx.out / "distances.csv", dist);
    ctx.summary["cells"] = cells.size();
}

void run_group_mode(RunContext &ctx)
{
    struct Cell {
        GroupSpec group;
        double snr;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    const auto groups = effective_groups(ctx.config);
    for (const auto &g : groups)
        for (double snr : ctx.config.snrs_db)
            for (auto seed : ctx.config.seeds)
                cells.push_back({g, snr, seed});
    std::vector<std::string> rows(cells.size());
    std::vector<char> ok(cells.size());
    detail::parallel_for(cells.size(), ctx.config.workers, [&](std::size_t i) {
        const auto &c = cells[i];
        const auto &ues = c.group.ues;
        const auto spec =
            profile_group_decoder(ctx.config.profile, ctx.grid, ues.size(), c.group.preoutput_layers, ctx.config.seed_rule);
        std::vector<PreprocessedTarget> targets;
        std::vector<ChannelTensor> truths;
        for (int ue : ues) {
            targets.push_back(preprocess(measure(ctx, ue, c.snr, c.seed)));
            truths.push_back(ctx.truths.at(ue));
        }
        const auto group = build_group(ues, targets);
        FitConfig cfg = ctx.fit;
        cfg.iterations = c.group.iterations.value_or(ctx.fit.iterations * ues.size());
        cfg.init_seed = derive_seed(ctx.fit.init_seed, {static_cast<std::int64_t>(c.seed), 1000 + static_cast<std::int64_t>(i)});
        const std::size_t coeffs = ctx.grid.n_sub * ctx.grid.n_sp * ctx.grid.n_ant() * ues.size();
        std::ostringstream os;
        const std::string tag = "group_" + c.group.id + "_snr" + snr_label(c.snr) + "_seed" + std::to_string(c.seed);
        try {
            const auto r = fit_group(spec, group, cfg, truths);
            ok[i] = 1;
            std::vector<NormalizationMeta> meta;
            for (std::size_t u = 0; u < ues.size(); ++u) {
                meta.push_back({group.norms[u], group.scales[u]});
                os << c.group.id << ',' << ues[u] << ',' << snr_label(c.snr) << ',' << format_double(r.nmse_db[u])
                   << ',' << r.report.iterations << ',' << param_count(spec) << ','
                   << format_double(compression_ratio(spec, coeffs)) << ',' << c.seed << ",ok\n";
            }
            write_text(ctx.out / "fit_traces" / (tag + ".csv"), trace_csv(r.report));
            write_report(ctx.out / "reports" / (tag + ".csir"), {spec, r.report.params, meta});
        } catch (const FitDiverged &) {
            for (int ue : ues)
                os << c.group.id << ',' << ue << ',' << snr_label(c.snr) << ",nan," << cfg.iterations << ','
                   << param_count(spec) << ',' << format_double(compression_ratio(spec, coeffs)) << ',' << c.seed
                   << ",diverged\n";
        }
        rows[i] = os.str();
    });
    std::string csv = "group,ue,snr_db,nmse_db,iterations,param_count,compression_ratio,seed,status\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        csv += rows[i];
        ctx.diverged += ok[i] ? 0 : 1;
    }
    write_text(ctx.out / "results.csv", csv);
    nlohmann::json gs = nlohmann::json::array();
    for (const auto &g : groups) {
        const auto spec =
            profile_group_decoder(ctx.config.profile, ctx.grid, g.ues.size(), g.preoutput_layers, ctx.config.seed_rule);
        const std::size_t coeffs = ctx.grid.n_sub * ctx.grid.n_sp * ctx.grid.n_ant() * g.ues.size();
        gs.push_back({{"id", g.id},
                      {"ues", g.ues},
                      {"param_count", param_count(spec)},
                      {"complex_coefficients", coeffs},
                      {"compression_ratio", compression_ratio(spec, coeffs)}});
    }
    ctx.summary["groups"] = gs;
    ctx.summary["cells"] = cells.size();
}

} // namespace

int run(const ExperimentConfig &config, std::ostream &log)
{
    const auto diagnostics = validate(config);
    for (const auto &d : diagnostics)
        log << (d.level == Diagnostic::Level::error ? "error: " : "warning: ") << d.message << '\n';
    if (has_errors(diagnostics))
        return 2;

    const auto start = std::chrono::steady_clock::now();
    RunContext ctx{config, profile_scene(load_scene(config.scene_path), config.profile), {}, config.effective_fit(),
                   {}, {}, config.out, nlohmann::json::object(), 0};
    ctx.spec = load_decoder(config, ctx.grid);
    ctx.ues = selected_ues(config, ctx.grid);
    std::vector<int> needed = ctx.ues;
    for (const auto &p : config.plans)
        for (int ue : p.ues())
            needed.push_back(ue);
    if (config.mode == Mode::group)
        for (const auto &g : effective_groups(config))
            needed.insert(needed.end(), g.ues.begin(), g.ues.end());
    for (int ue : needed)
        if (!ctx.truths.count(ue))
            ctx.truths.emplace(ue, synthesize(ctx.grid, ue));

    for (const char *sub : {"fit_traces", "reports"})
        fs::create_directories(ctx.out / sub);
    if (config.write_tensors) {
        fs::create_directories(ctx.out / "tensors");
        for (const auto &[ue, h] : ctx.truths)
            write_tensor(ctx.out / "tensors" / ("ue" + std::to_string(ue) + "_truth.csit"), h.data);
    }
    log << "mode " << to_string(config.mode) << ", profile " << to_string(config.profile) << ", grid "
        << ctx.grid.n_sub << "x" << ctx.grid.n_sp << "x" << ctx.grid.n_ant() << ", " << config.workers
        << " worker(s)\n";

    switch (config.mode) {
    case Mode::single:
        run_single(ctx);
        break;
    case Mode::codec:
        run_codec(ctx);
        break;
    case Mode::sweep:
        run_sweep_mode(ctx);
        break;
    case Mode::transfer:
        run_transfer_mode(ctx);
        break;
    case Mode::group:
        run_group_mode(ctx);
        break;
    }

    const std::size_t coeffs = ctx.grid.n_sub * ctx.grid.n_sp * ctx.grid.n_ant();
    auto &s = ctx.summary;
    s["mode"] = to_string(config.mode);
    s["profile"] = to_string(config.profile);
    s["grid"] = {{"n_sub", ctx.grid.n_sub}, {"n_sp", ctx.grid.n_sp}, {"n_ant", ctx.grid.n_ant()}};
    s["decoder"] = to_json(ctx.spec);
    s["param_count"] = param_count(ctx.spec);
    s["complex_coefficients"] = coeffs;
    s["compression_ratio"] = compression_ratio(ctx.spec, coeffs);
    s["fit"] = to_json(ctx.fit);
    s["diverged_cells"] = ctx.diverged;
    s["config"] = to_json(config);
    write_text(ctx.out / "summary.json", s.dump(2) + "\n");

    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text(ctx.out / "timing.json", nlohmann::json{{"elapsed_s", elapsed}, {"workers", config.workers}}.dump(2) + "\n");
    log << "done in " << format_double(elapsed, 4) << " s; " << ctx.diverged << " diverged cell(s); results in "
        << ctx.out.string() << '\n';
    return 0;
}

} // namespace unncsi

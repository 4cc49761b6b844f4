// coxpen: command-line driver for penalized Cox fits, simulation and the
// experiment tables. Every command is deterministic given --seed.

#include "coxpen/errors.hpp"
#include "coxpen/experiment.hpp"
#include "coxpen/metrics.hpp"
#include "coxpen/model.hpp"
#include "coxpen/selection.hpp"
#include "coxpen/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

using nlohmann::json;
using namespace coxpen;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(number(v[i]));
    return out;
}

Eigen::VectorXd vector_from(const json& j) {
    Eigen::VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Index>(i)] = j[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : j[i].get<double>();
    return v;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError(path + ": invalid JSON");
    return j;
}

void write_json(const std::string& path, const json& j) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << "\n";
        return;
    }
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path);
}

std::string sidecar_path(const std::string& csv) {
    std::filesystem::path p(csv);
    p.replace_extension(".json");
    return p.string();
}

// --gamma accepts a number or "grid".
std::optional<double> parse_gamma(const std::string& text) {
    if (text == "grid") return std::nullopt;
    std::size_t used = 0;
    double g = 0.0;
    try {
        g = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("--gamma must be a number or 'grid'");
    }
    if (used != text.size()) throw ConfigError("--gamma must be a number or 'grid'");
    return g;
}

struct ModelFlags {
    std::string penalty = "lasso";
    std::string weights;
    std::string gamma = "grid";
    int folds = 10;
    std::string cv_mode = "vvh";
    bool stratify = false;
    int trees = 500;

    void add(CLI::App* cmd) {
        cmd->add_option("--penalty", penalty, "lasso | alasso")->check(CLI::IsMember({"lasso", "alasso"}));
        cmd->add_option("--weights", weights, "ridge | pca | uni | rsf (adaptive lasso)")
            ->check(CLI::IsMember({"ridge", "pca", "uni", "rsf"}));
        cmd->add_option("--gamma", gamma, "weight exponent in [0.2, 2] or 'grid'");
        cmd->add_option("--folds", folds, "cross-validation folds");
        cmd->add_option("--cv-mode", cv_mode, "vvh | basic")->check(CLI::IsMember({"vvh", "basic"}));
        cmd->add_flag("--stratify", stratify, "balance events across folds");
        cmd->add_option("--trees", trees, "trees for RSF weights");
    }

    ModelSpec spec(unsigned threads) const {
        ModelSpec s;
        if (penalty == "alasso") {
            if (weights.empty()) throw ConfigError("--penalty alasso needs --weights");
            s.penalty = PenaltyKind::adaptive_lasso;
            s.weights = weight_source_from_string(weights);
            s.gamma = parse_gamma(gamma);
        } else if (!weights.empty()) {
            throw ConfigError("--weights applies to --penalty alasso only");
        }
        s.folds = folds;
        s.cv_mode = cv_mode_from_string(cv_mode);
        s.stratify_folds = stratify;
        s.forest.n_trees = trees;
        s.threads = threads;
        s.validate();
        return s;
    }

    json describe() const {
        return json{{"penalty", penalty}, {"weights", weights.empty() ? json(nullptr) : json(weights)},
                    {"gamma", gamma},     {"folds", folds},
                    {"cv_mode", cv_mode}, {"stratify", stratify},
                    {"trees", trees}};
    }
};

SimulationConfig simulation_from_json(const json& j) {
    SimulationConfig c;
    c.n = j.value("n", c.n);
    c.p = j.value("p", c.p);
    c.phi = j.value("phi", c.phi);
    if (j.contains("coef_scheme")) c.coef_scheme = coef_scheme_from_string(j["coef_scheme"].get<std::string>());
    if (j.contains("covariance")) c.covariance = covariance_kind_from_string(j["covariance"].get<std::string>());
    c.alpha = j.value("alpha", c.alpha);
    c.rho = j.value("rho", c.rho);
    c.theta = j.value("theta", c.theta);
    c.calibration_draws = j.value("calibration_draws", c.calibration_draws);
    if (j.contains("support")) c.support = j["support"].get<std::vector<Index>>();
    if (j.contains("nu") && !j["nu"].is_null()) c.nu = j["nu"].get<double>();
    return c;
}

json simulation_json(const SimulationConfig& c) {
    json j{{"n", c.n},
           {"p", c.p},
           {"phi", c.phi},
           {"coef_scheme", to_string(c.coef_scheme)},
           {"covariance", to_string(c.covariance)},
           {"alpha", c.alpha},
           {"rho", c.rho},
           {"theta", c.theta},
           {"calibration_draws", c.calibration_draws},
           {"calibration_seed", c.calibration_seed}};
    if (c.support) j["support"] = *c.support;
    return j;
}

int cmd_simulate(const std::string& config_path, SimulationConfig config, const std::string& out,
                 std::uint64_t seed) {
    if (!config_path.empty()) {
        const json file = read_json(config_path);
        config = simulation_from_json(file);
    }
    config.seed = seed;
    config.calibration_seed = derive_seed(seed, 0xca1bULL);
    const SimulatedDataset sim = generate(config);
    save_csv(sim.dataset, out);
    std::vector<Index> support;
    for (Index j = 0; j < sim.beta_true.size(); ++j)
        if (sim.beta_true[j] != 0.0) support.push_back(j);
    json side{{"command", "simulate"},
              {"seed", seed},
              {"config", simulation_json(config)},
              {"beta_true", vector_json(sim.beta_true)},
              {"support", support},
              {"nu", number(sim.nu)},
              {"achieved_censoring", sim.achieved_censoring},
              {"data", std::filesystem::path(out).filename().string()}};
    write_json(sidecar_path(out), side);
    return 0;
}

int cmd_fit(const std::string& data_path, const ModelFlags& flags, std::uint64_t seed, unsigned threads,
            const std::string& out) {
    const SurvivalDataset data = load_csv(data_path);
    const ModelSpec spec = flags.spec(threads);
    const FittedModel m = fit_model(data, spec, seed);

    json cv{{"mode", to_string(m.cv.mode)},
            {"folds", m.cv.folds},
            {"lambdas", m.cv.lambdas},
            {"cve", json::array()},
            {"se", json::array()},
            {"index_min", m.cv.index_min},
            {"lambda_min", m.cv.lambda_min}};
    for (std::size_t k = 0; k < m.cv.cve.size(); ++k) {
        cv["cve"].push_back(number(m.cv.cve[k]));
        cv["se"].push_back(number(m.cv.se[k]));
    }
    json weights = nullptr;
    if (spec.penalty == PenaltyKind::adaptive_lasso) {
        weights = json{{"source", to_string(m.weights.source)},
                       {"gamma", m.weights.gamma},
                       {"w", vector_json(m.weights.w)},
                       {"base", vector_json(m.weights.base)},
                       {"notes", m.weights.notes}};
        if (m.gamma_search)
            weights["gamma_search"] = json{{"grid", m.gamma_search->grid}, {"min_cve", m.gamma_search->min_cve}};
    }
    json report{{"command", "fit"},
                {"seed", seed},
                {"model", spec.label()},
                {"options", flags.describe()},
                {"n", data.n()},
                {"p", data.p()},
                {"events", data.events()},
                {"names", data.names},
                {"coefficients", vector_json(m.fit.beta)},
                {"coefficients_standardized", vector_json(m.beta_standardized)},
                {"standardization", {{"means", vector_json(m.transform.means)}, {"scales", vector_json(m.transform.scales)}}},
                {"lambda", m.lambda},
                {"lambda_unscaled", m.lambda_unscaled},
                {"nonzero", m.nonzero},
                {"converged", m.fit.converged},
                {"log_partial_likelihood", m.fit.log_partial_likelihood},
                {"warnings", m.fit.warnings},
                {"weights", weights},
                {"cv", cv}};
    write_json(out, report);
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path, const std::string& truth_path,
                 std::optional<double> tau, const std::string& out) {
    const json model = read_json(model_path);
    const SurvivalDataset data = load_csv(data_path);
    const Eigen::VectorXd beta = vector_from(model.at("coefficients"));
    if (beta.size() != data.p())
        throw ValidationError("model has " + std::to_string(beta.size()) + " coefficients but data has " +
                              std::to_string(data.p()) + " covariates");
    const Eigen::VectorXd scores = risk_scores(data, beta);

    json report{{"command", "evaluate"}, {"seed", model.value("seed", json(nullptr))}, {"n", data.n()}};
    report["k_index"] = cpe_k_index(scores);
    json notes = json::array();
    try {
        report["harrell_c"] = harrell_c(data.time, data.status, scores);
    } catch (const UndefinedError& e) {
        report["harrell_c"] = nullptr;
        notes.push_back(std::string("harrell_c: ") + e.what());
    }
    double t = 0.0;
    if (tau) {
        t = *tau;
    } else {
        // Default: the largest event time.
        for (Index i = 0; i < data.n(); ++i)
            if (data.status[i]) t = std::max(t, data.time[i]);
    }
    report["tau"] = t;
    try {
        report["uno_c"] = uno_c(data.time, data.status, scores, t, km_censoring(data));
    } catch (const Error& e) {
        report["uno_c"] = nullptr;
        notes.push_back(std::string("uno_c: ") + e.what());
    }
    if (!truth_path.empty()) {
        const json truth = read_json(truth_path);
        const Eigen::VectorXd beta_true = vector_from(truth.at("beta_true"));
        if (beta_true.size() != beta.size()) throw ValidationError("truth sidecar length does not match the model");
        const SelectionMetrics m = selection_metrics(beta_true, beta, data.x);
        report["selection"] = json{{"tpr", m.tpr},
                                   {"fpr", m.fpr},
                                   {"fnr", m.fnr},
                                   {"f1", m.f1},
                                   {"l2_error", m.l2_error},
                                   {"median_risk_ratio", number(m.median_risk_ratio)},
                                   {"selected", m.selected},
                                   {"true_positives", m.true_positives},
                                   {"false_positives", m.false_positives}};
    }
    report["notes"] = notes;
    write_json(out, report);
    return 0;
}

int cmd_select(const std::string& data_path, const ModelFlags& flags, int partitions, Index train_size, bool literal,
               std::uint64_t seed, unsigned threads, const std::string& out, const std::string& importance_csv) {
    const SurvivalDataset data = load_csv(data_path);
    SelectionSpec spec;
    spec.model = flags.spec(1);
    spec.partitions = partitions;
    spec.train_size = train_size;
    spec.seed = seed;
    spec.threads = threads;
    spec.literal_power_index = literal;
    const SelectionRun run = run_selection(data, spec);

    json iterations = json::array();
    for (const auto& it : run.iterations) {
        std::vector<Index> support;
        for (Index j = 0; j < it.beta.size(); ++j)
            if (it.beta[j] != 0.0) support.push_back(j);
        iterations.push_back(json{{"seed", it.seed},
                                  {"k_index", it.k_index},
                                  {"power", it.power},
                                  {"lambda", it.lambda},
                                  {"support", support}});
    }
    std::vector<std::string> final_names;
    for (Index j : run.final_support) final_names.push_back(data.names[static_cast<std::size_t>(j)]);
    json report{{"command", "select"},
                {"seed", seed},
                {"model", spec.model.label()},
                {"options", flags.describe()},
                {"partitions", partitions},
                {"train_size", spec.train_size > 0 ? spec.train_size : data.n() / 2},
                {"literal_power_index", literal},
                {"names", data.names},
                {"iterations", iterations},
                {"importance", vector_json(run.importance)},
                {"k_top", run.k_top},
                {"best", run.best + 1},
                {"final_support", run.final_support},
                {"final_names", final_names},
                {"final_method", run.final_method},
                {"final_coefficients", vector_json(run.final_fit.beta)},
                {"final_converged", run.final_fit.converged},
                {"notes", run.notes}};
    write_json(out, report);

    if (!importance_csv.empty()) {
        std::ostringstream csv;
        csv << "rank,variable,name,importance\n";
        const auto order = importance_ranking(run);
        for (std::size_t r = 0; r < order.size(); ++r) {
            const Index j = order[r];
            csv << r + 1 << ',' << j + 1 << ',' << data.names[static_cast<std::size_t>(j)] << ','
                << format_double(run.importance[j]) << '\n';
        }
        std::ofstream f(importance_csv, std::ios::binary);
        if (!f) throw IoError("cannot write " + importance_csv);
        f << csv.str();
    }
    return 0;
}

json point_summary(const DesignPointResult& point) {
    json models = json::array();
    for (std::size_t m = 0; m < point.models.size(); ++m) {
        std::vector<double> tpr, fpr, f1, l2, risk;
        for (const auto& r : point.records[m]) {
            tpr.push_back(r.tpr);
            fpr.push_back(r.fpr);
            f1.push_back(r.f1);
            l2.push_back(r.l2);
            risk.push_back(r.median_risk);
        }
        auto pair = [](const Summary& s) { return json{{"mean", number(s.mean)}, {"sd", number(s.sd)}}; };
        models.push_back(json{{"model", point.models[m]},
                              {"tpr", pair(summarize(tpr))},
                              {"fpr", pair(summarize(fpr))},
                              {"f1", pair(summarize(f1))},
                              {"l2", pair(summarize(l2))},
                              {"median_risk", number(median_of(risk))}});
    }
    return json{{"case", point.case_name}, {"theta", point.theta}, {"nu", number(point.nu)}, {"models", models}};
}

int cmd_table(const std::string& preset_name, double scale, int replicates, const std::string& gamma,
              const std::string& out_dir, std::uint64_t seed, unsigned threads, bool resume, bool verbose) {
    if (preset_name == "censoring") {
        CensoringStudy study;
        study.seed = seed;
        study.threads = threads;
        study.p = std::max<Index>(10 * study.phi, static_cast<Index>(std::llround(4000.0 * scale)));
        study.datasets = replicates > 0 ? replicates : std::max(2, static_cast<int>(std::lround(100 * scale)));
        const auto rows = censoring_table(study);
        write_censoring_table(rows, out_dir);
        json summary{{"command", "table"}, {"preset", preset_name}, {"seed", seed}, {"scale", scale},
                     {"p", study.p},       {"datasets", study.datasets}, {"rows", json::array()}};
        for (const auto& r : rows)
            summary["rows"].push_back(json{{"covariance", r.label},
                                           {"theta", r.theta},
                                           {"nu", number(r.nu)},
                                           {"mean", r.mean},
                                           {"sd", r.sd}});
        write_json((std::filesystem::path(out_dir) / "summary.json").string(), summary);
        return 0;
    }
    ExperimentPreset preset = experiment_preset(preset_name, scale);
    preset.seed = seed;
    if (replicates > 0) preset.replicates = replicates;
    preset.gamma = parse_gamma(gamma);
    ExperimentRunOptions opts;
    opts.threads = threads;
    opts.verbose = verbose;
    if (resume) opts.checkpoint_dir = (std::filesystem::path(out_dir) / "checkpoints").string();
    const ExperimentResult result = run_experiment(preset, opts);
    const auto files = write_tables(result, out_dir);

    json summary{{"command", "table"},
                 {"preset", preset_name},
                 {"seed", seed},
                 {"scale", scale},
                 {"replicates", preset.replicates},
                 {"gamma", gamma},
                 {"points", json::array()}};
    for (const auto& point : result.points) summary["points"].push_back(point_summary(point));
    write_json((std::filesystem::path(out_dir) / "summary.json").string(), summary);
    return 0;
}

int cmd_curves(double lambda, const std::vector<double>& gammas, double zmax, int points, const std::string& out) {
    if (!(lambda > 0.0)) throw ConfigError("--lambda must be positive");
    if (points < 2 || !(zmax > 0.0)) throw ConfigError("need --points >= 2 and --zmax > 0");
    std::ostringstream csv;
    csv << "z,lasso";
    for (double g : gammas) csv << ",adaptive_gamma_" << format_double(g);
    csv << '\n';
    for (int k = 0; k < points; ++k) {
        const double z = -zmax + 2.0 * zmax * k / (points - 1);
        csv << format_double(z) << ',' << format_double(soft_threshold_update(z, 1.0, lambda));
        for (double g : gammas) {
            const double w = z == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / std::pow(std::abs(z), g);
            csv << ',' << format_double(std::isinf(w) ? 0.0 : soft_threshold_update(z, 1.0, lambda * w));
        }
        csv << '\n';
    }
    if (out.empty() || out == "-") {
        std::cout << csv.str();
        return 0;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw IoError("cannot write " + out);
    f << csv.str();
    return 0;
}

void report_error(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Penalized Cox regression: lasso and adaptive lasso fits, simulation and experiment tables"};
    app.require_subcommand(1);
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::string out;
    app.add_option("--seed", seed, "master RNG seed")->capture_default_str();
    app.add_option("--threads", threads, "worker threads")->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a dataset: CSV plus a JSON sidecar with the truth");
    SimulationConfig sim_config;
    std::string sim_json, cov = "independent", coef = "constant_half";
    sim->add_option("--config", sim_json, "JSON file with simulation settings");
    sim->add_option("--n", sim_config.n, "subjects")->capture_default_str();
    sim->add_option("--p", sim_config.p, "covariates")->capture_default_str();
    sim->add_option("--phi", sim_config.phi, "nonzero coefficients")->capture_default_str();
    sim->add_option("--theta", sim_config.theta, "target censoring proportion")->capture_default_str();
    sim->add_option("--covariance", cov, "independent | ar_half | block_half")
        ->check(CLI::IsMember({"independent", "ar_half", "block_half"}));
    sim->add_option("--coef", coef, "constant_half | range_1_to_10")
        ->check(CLI::IsMember({"constant_half", "range_1_to_10"}));
    sim->add_option("--out", out, "output CSV path")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "cross-validated lasso / adaptive-lasso fit");
    std::string data_path;
    ModelFlags fit_flags;
    fit->add_option("--data", data_path, "CSV: time,status,covariates...")->required();
    fit_flags.add(fit);
    fit->add_option("--out", out, "model JSON path ('-' for stdout)");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "K-index, Harrell and Uno C, and truth-based metrics");
    std::string model_path, truth_path;
    std::optional<double> tau;
    eval->add_option("--model", model_path, "model JSON from 'fit'")->required();
    eval->add_option("--data", data_path, "test CSV")->required();
    eval->add_option("--truth", truth_path, "simulation sidecar holding beta_true");
    eval->add_option("--tau", tau, "truncation time for Uno's C (default: largest event time)");
    eval->add_option("--out", out, "metrics JSON path ('-' for stdout)");

    // select
    auto* sel = app.add_subcommand("select", "best-model selection over repeated train/test partitions");
    ModelFlags sel_flags;
    int partitions = 100;
    Index train_size = 0;
    bool literal = false;
    std::string importance_csv;
    sel->add_option("--data", data_path, "CSV: time,status,covariates...")->required();
    sel_flags.add(sel);
    sel->add_option("--partitions", partitions, "number of partitions N")->capture_default_str();
    sel->add_option("--train-size", train_size, "training rows (default n/2)");
    sel->add_flag("--literal-power-index", literal, "sum the power index over {I_j <= I_(K)}");
    sel->add_option("--importance-csv", importance_csv, "sorted importance table");
    sel->add_option("--out", out, "report JSON path ('-' for stdout)");

    // table
    auto* table = app.add_subcommand("table", "run an experiment preset and write its tables");
    std::string preset = "desk", table_gamma = "1";
    double scale = 1.0;
    int replicates = 0;
    bool resume = false, verbose = false;
    table->add_option("--preset", preset, "desk | desk_block | full | censoring")
        ->check(CLI::IsMember({"desk", "desk_block", "full", "censoring"}));
    table->add_option("--scale", scale, "shrink p and replicates by this factor in (0, 1]")->capture_default_str();
    table->add_option("--replicates", replicates, "override the replicate count");
    table->add_option("--gamma", table_gamma, "weight exponent or 'grid'")->capture_default_str();
    table->add_flag("--resume", resume, "checkpoint each design point under <out>/checkpoints");
    table->add_flag("--verbose", verbose, "progress on stderr");
    table->add_option("--out", out, "output directory")->required();

    // curves
    auto* curves = app.add_subcommand("curves", "lasso and adaptive-lasso thresholding functions as CSV");
    double lambda = 1.0, zmax = 5.0;
    int points = 201;
    std::vector<double> gammas{1.0};
    curves->add_option("--lambda", lambda, "threshold level")->capture_default_str();
    curves->add_option("--gamma", gammas, "adaptive exponents")->capture_default_str();
    curves->add_option("--zmax", zmax, "grid covers [-zmax, zmax]")->capture_default_str();
    curves->add_option("--points", points, "grid size")->capture_default_str();
    curves->add_option("--out", out, "CSV path ('-' for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("usage", e.what());
        return 2;
    }

    try {
        if (*sim) {
            sim_config.covariance = covariance_kind_from_string(cov);
            sim_config.coef_scheme = coef_scheme_from_string(coef);
            return cmd_simulate(sim_json, sim_config, out, seed);
        }
        if (*fit) return cmd_fit(data_path, fit_flags, seed, threads, out);
        if (*eval) return cmd_evaluate(model_path, data_path, truth_path, tau, out);
        if (*sel)
            return cmd_select(data_path, sel_flags, partitions, train_size, literal, seed, threads, out, importance_csv);
        if (*table) return cmd_table(preset, scale, replicates, table_gamma, out, seed, threads, resume, verbose);
        if (*curves) return cmd_curves(lambda, gammas, zmax, points, out);
    } catch (const ConfigError& e) {
        report_error(e.kind(), e.what());
        return 2;
    } catch (const Error& e) {
        report_error(e.kind(), e.what());
        return 1;
    } catch (const json::exception& e) {
        report_error("parse_error", e.what());
        return 1;
    } catch (const std::exception& e) {
        report_error("internal_error", e.what());
        return 1;
    }
    return 0;
}

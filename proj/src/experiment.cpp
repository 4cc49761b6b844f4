#include "coxpen/experiment.hpp"

#include "coxpen/errors.hpp"
#include "coxpen/metrics.hpp"
#include "coxpen/parallel.hpp"
#include "coxpen/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>

namespace coxpen {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string theta_key(double theta) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", theta);
    return buf;
}

std::uint64_t point_seed(std::uint64_t master, const std::string& case_name, double theta) {
    return derive_seed(master, fnv1a(case_name + "|" + theta_key(theta)));
}

std::string fixed(double v, int digits = 3) {
    if (!std::isfinite(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string mean_sd(const Summary& s) { return fixed(s.mean) + " (" + fixed(s.sd) + ")"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const ReplicateRecord& r) {
    return json{{"replicate", r.replicate},   {"seed", r.seed},
                {"censoring", r.censoring},   {"tpr", r.tpr},
                {"fpr", r.fpr},               {"f1", r.f1},
                {"median_risk", nullable(r.median_risk)},
                {"l2", r.l2},                 {"selected", r.selected},
                {"gamma", r.gamma},           {"lambda", r.lambda},
                {"block_selected", r.block_selected},
                {"block_correct", r.block_correct},
                {"block_truth", r.block_truth}};
}

ReplicateRecord record_from_json(const json& j) {
    ReplicateRecord r;
    r.replicate = j.at("replicate").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.censoring = j.at("censoring").get<double>();
    r.tpr = j.at("tpr").get<double>();
    r.fpr = j.at("fpr").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.median_risk = j.at("median_risk").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                  : j.at("median_risk").get<double>();
    r.l2 = j.at("l2").get<double>();
    r.selected = j.at("selected").get<Index>();
    r.gamma = j.at("gamma").get<double>();
    r.lambda = j.at("lambda").get<double>();
    r.block_selected = j.at("block_selected").get<std::vector<Index>>();
    r.block_correct = j.at("block_correct").get<std::vector<Index>>();
    r.block_truth = j.at("block_truth").get<std::vector<Index>>();
    return r;
}

json fingerprint(const ExperimentPreset& preset, const DesignCase& design, double theta,
                 const std::vector<std::string>& models) {
    return json{{"preset", preset.name},
                {"seed", preset.seed},
                {"replicates", preset.replicates},
                {"n", preset.n},
                {"train_size", preset.train_size},
                {"gamma", preset.gamma ? json(*preset.gamma) : json("grid")},
                {"folds", preset.folds},
                {"trees", preset.forest.n_trees},
                {"case", design.name},
                {"covariance", to_string(design.covariance)},
                {"p", design.p},
                {"phi", design.phi},
                {"coef", to_string(design.coef)},
                {"theta", theta},
                {"models", models}};
}

std::filesystem::path checkpoint_path(const std::string& dir, const DesignCase& design, double theta) {
    return std::filesystem::path(dir) / ("checkpoint_" + design.name + "_theta" + theta_key(theta) + ".json");
}

SimulationConfig design_config(const ExperimentPreset& preset, const DesignCase& design, double theta) {
    SimulationConfig c;
    c.n = preset.n;
    c.p = design.p;
    c.phi = design.phi;
    c.coef_scheme = design.coef;
    c.covariance = design.covariance;
    c.theta = theta;
    c.calibration_seed = derive_seed(point_seed(preset.seed, design.name, theta), 0xca1bULL);
    return c;
}

} // namespace

void ExperimentPreset::validate() const {
    if (cases.empty() || thetas.empty() || models.empty()) throw ConfigError("experiment grid is empty");
    if (replicates < 1) throw ConfigError("experiment needs at least one replicate");
    if (train_size < 1 || train_size >= n) throw ConfigError("train size must lie in [1, n)");
    for (const auto& c : cases) {
        if (c.phi < 1 || c.phi > c.p) throw ConfigError("case " + c.name + ": phi must lie in [1, p]");
    }
    for (double t : thetas)
        if (!(t >= 0.0 && t < 1.0)) throw ConfigError("theta must lie in [0, 1)");
    for (const auto& m : models) model_spec_from_label(m);
}

std::vector<std::string> ExperimentPreset::models_at(std::size_t case_index, std::size_t theta_index) const {
    std::vector<std::string> out;
    for (const auto& m : models) {
        const bool rsf = m == "RSF" || m == "rsf";
        if (rsf && rsf_first_point_only && (case_index != 0 || theta_index != 0)) continue;
        out.push_back(m);
    }
    return out;
}

std::vector<std::string> preset_names() { return {"desk", "desk_block", "full"}; }

ExperimentPreset experiment_preset(const std::string& name, double scale) {
    if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("scale must lie in (0, 1]");
    ExperimentPreset preset;
    preset.name = name;
    if (name == "desk") {
        preset.cases = {{"independent", CovarianceKind::independent, 600, 30, CoefScheme::constant_half}};
        preset.thetas = {0.0, 0.8};
        preset.models = {"Lasso", "Ridge", "PCA", "Uni", "RSF"};
        preset.replicates = 20;
    } else if (name == "desk_block") {
        preset.cases = {{"block", CovarianceKind::block_half, 600, 30, CoefScheme::constant_half}};
        preset.thetas = {0.0, 0.8};
        preset.models = {"Lasso", "Ridge", "PCA", "Uni"};
        preset.replicates = 20;
    } else if (name == "full") {
        preset.cases = {{"independent", CovarianceKind::independent, 4000, 30, CoefScheme::constant_half},
                        {"correlated", CovarianceKind::ar_half, 4000, 30, CoefScheme::constant_half},
                        {"block", CovarianceKind::block_half, 4000, 30, CoefScheme::constant_half}};
        preset.thetas = {0.0, 0.2, 0.8};
        preset.models = {"Lasso", "Ridge", "PCA", "Uni", "RSF"};
        preset.replicates = 100;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    if (scale < 1.0) {
        for (auto& c : preset.cases)
            c.p = std::max<Index>(10 * c.phi, static_cast<Index>(std::llround(static_cast<double>(c.p) * scale)));
        preset.replicates = std::max(2, static_cast<int>(std::lround(preset.replicates * scale)));
    }
    return preset;
}

Summary summarize(const std::vector<double>& values) {
    Summary s;
    if (values.empty()) {
        s.mean = s.sd = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

double median_of(std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
                 values.end());
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

std::vector<ReplicateRecord> run_replicate(const ExperimentPreset& preset, const DesignCase& design, double theta,
                                           double nu, int replicate, const std::vector<std::string>& models) {
    const std::uint64_t seed = derive_seed(point_seed(preset.seed, design.name, theta), static_cast<std::uint64_t>(replicate));
    SimulationConfig config = design_config(preset, design, theta);
    config.seed = derive_seed(seed, 0);
    config.nu = nu;
    const SimulatedDataset sim = generate(config);
    const Partition part = split(sim.dataset, preset.train_size, derive_seed(seed, 1));
    const SurvivalDataset train = sim.dataset.subset(part.train);
    const SurvivalDataset test = sim.dataset.subset(part.test);

    std::vector<ReplicateRecord> out;
    for (const auto& label : models) {
        ModelSpec spec = model_spec_from_label(label);
        spec.folds = preset.folds;
        spec.forest = preset.forest;
        if (spec.penalty == PenaltyKind::adaptive_lasso) spec.gamma = preset.gamma;
        const FittedModel fitted = fit_model(train, spec, derive_seed(seed, 2));
        const SelectionMetrics m = selection_metrics(sim.beta_true, fitted.fit.beta, test.x);

        ReplicateRecord r;
        r.replicate = replicate;
        r.seed = seed;
        r.censoring = sim.achieved_censoring;
        r.tpr = m.tpr;
        r.fpr = m.fpr;
        r.f1 = m.f1;
        r.median_risk = m.median_risk_ratio;
        r.l2 = m.l2_error;
        r.selected = m.selected;
        r.gamma = fitted.gamma_search ? fitted.gamma_search->gamma : (spec.gamma ? *spec.gamma : 1.0);
        r.lambda = fitted.lambda;
        r.block_selected.assign(kBlockCount, 0);
        r.block_correct.assign(kBlockCount, 0);
        r.block_truth.assign(kBlockCount, 0);
        for (Index j = 0; j < design.p; ++j) {
            const auto b = static_cast<std::size_t>(j % kBlockCount);
            const bool chosen = fitted.fit.beta[j] != 0.0;
            const bool truth = sim.beta_true[j] != 0.0;
            r.block_selected[b] += chosen;
            r.block_truth[b] += truth;
            r.block_correct[b] += chosen && truth;
        }
        out.push_back(std::move(r));
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentPreset& preset, const ExperimentRunOptions& opts) {
    preset.validate();
    ExperimentResult result;
    result.preset = preset;
    if (!opts.checkpoint_dir.empty()) std::filesystem::create_directories(opts.checkpoint_dir);
    std::mutex log_mutex;

    for (std::size_t ci = 0; ci < preset.cases.size(); ++ci) {
        const DesignCase& design = preset.cases[ci];
        for (std::size_t ti = 0; ti < preset.thetas.size(); ++ti) {
            const double theta = preset.thetas[ti];
            DesignPointResult point;
            point.case_name = design.name;
            point.theta = theta;
            point.models = preset.models_at(ci, ti);
            const json key = fingerprint(preset, design, theta, point.models);

            if (!opts.checkpoint_dir.empty()) {
                const auto path = checkpoint_path(opts.checkpoint_dir, design, theta);
                if (std::filesystem::exists(path)) {
                    std::ifstream in(path);
                    const json saved = json::parse(in, nullptr, false);
                    if (!saved.is_discarded() && saved.value("key", json()) == key) {
                        point.nu = saved.at("nu").is_null() ? std::numeric_limits<double>::infinity()
                                                            : saved.at("nu").get<double>();
                        for (const auto& per_model : saved.at("records")) {
                            std::vector<ReplicateRecord> recs;
                            for (const auto& r : per_model) recs.push_back(record_from_json(r));
                            point.records.push_back(std::move(recs));
                        }
                        if (opts.verbose)
                            std::cerr << "resumed " << design.name << " theta=" << theta_key(theta) << "\n";
                        result.points.push_back(std::move(point));
                        continue;
                    }
                }
            }

            const SimulationConfig config = design_config(preset, design, theta);
            point.nu = calibrate_censoring(config).nu;
            std::vector<std::vector<ReplicateRecord>> per_rep(static_cast<std::size_t>(preset.replicates));
            parallel_for(per_rep.size(), opts.threads, [&](std::size_t r) {
                per_rep[r] = run_replicate(preset, design, theta, point.nu, static_cast<int>(r), point.models);
                if (opts.verbose) {
                    std::lock_guard<std::mutex> lock(log_mutex);
                    std::cerr << design.name << " theta=" << theta_key(theta) << " replicate " << r + 1 << "/"
                              << preset.replicates << "\n";
                }
            });
            point.records.assign(point.models.size(), {});
            for (auto& rep : per_rep)
                for (std::size_t m = 0; m < rep.size(); ++m) point.records[m].push_back(std::move(rep[m]));

            if (!opts.checkpoint_dir.empty()) {
                json saved{{"key", key}, {"nu", nullable(point.nu)}, {"records", json::array()}};
                for (const auto& recs : point.records) {
                    json arr = json::array();
                    for (const auto& r : recs) arr.push_back(to_json(r));
                    saved["records"].push_back(std::move(arr));
                }
                write_text(checkpoint_path(opts.checkpoint_dir, design, theta), saved.dump(1) + "\n");
            }
            result.points.push_back(std::move(point));
        }
    }
    return result;
}

std::vector<std::string> write_tables(const ExperimentResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    const auto& preset = result.preset;

    for (const auto& design : preset.cases) {
        std::ostringstream csv, md, gsel_csv, gsel_md, gcor_csv, gcor_md;
        csv << "case,theta,model,gamma,replicates,tpr_mean,tpr_sd,fpr_mean,fpr_sd,f1_mean,f1_sd,median_risk,"
               "l2_mean,l2_sd,selected_mean,selected_sd,censoring_mean\n";
        md << "| theta | Model (gamma) | TPR | FPR | F1 score | Median | l2 error |\n"
              "|---|---|---|---|---|---|---|\n";
        std::string gheader = "theta,model";
        for (Index b = 1; b <= kBlockCount; ++b)
            gheader += ",G" + std::to_string(b) + "_mean,G" + std::to_string(b) + "_sd";
        gheader += ",selected_groups_mean,selected_groups_sd\n";
        gsel_csv << gheader;
        gcor_csv << gheader;
        std::string mdh = "| theta | Model (gamma) |";
        for (Index b = 1; b <= kBlockCount; ++b) mdh += " G" + std::to_string(b) + " |";
        mdh += " selected groups |\n|---|---|";
        for (Index b = 0; b <= kBlockCount; ++b) mdh += "---|";
        mdh += "\n";
        gsel_md << mdh;
        gcor_md << mdh;

        for (const auto& point : result.points) {
            if (point.case_name != design.name) continue;
            for (std::size_t m = 0; m < point.models.size(); ++m) {
                const auto& recs = point.records[m];
                std::vector<double> tpr, fpr, f1, risk, l2, sel, cens, gam;
                for (const auto& r : recs) {
                    tpr.push_back(r.tpr);
                    fpr.push_back(r.fpr);
                    f1.push_back(r.f1);
                    risk.push_back(r.median_risk);
                    l2.push_back(r.l2);
                    sel.push_back(static_cast<double>(r.selected));
                    cens.push_back(r.censoring);
                    gam.push_back(r.gamma);
                }
                const bool adaptive = model_spec_from_label(point.models[m]).penalty == PenaltyKind::adaptive_lasso;
                const double gamma = adaptive ? summarize(gam).mean : std::numeric_limits<double>::quiet_NaN();
                const std::string label =
                    point.models[m] + (adaptive ? " (" + format_double(std::round(gamma * 100.0) / 100.0) + ")" : "");
                const Summary st = summarize(tpr), sf = summarize(fpr), s1 = summarize(f1), sl = summarize(l2),
                              ss = summarize(sel);
                const double med = median_of(risk);
                csv << design.name << ',' << format_double(point.theta) << ',' << point.models[m] << ','
                    << (adaptive ? format_double(gamma) : "") << ',' << recs.size() << ',' << format_double(st.mean)
                    << ',' << format_double(st.sd) << ',' << format_double(sf.mean) << ',' << format_double(sf.sd)
                    << ',' << format_double(s1.mean) << ',' << format_double(s1.sd) << ','
                    << (std::isfinite(med) ? format_double(med) : "") << ',' << format_double(sl.mean) << ','
                    << format_double(sl.sd) << ',' << format_double(ss.mean) << ',' << format_double(ss.sd) << ','
                    << format_double(summarize(cens).mean) << '\n';
                md << "| " << fixed(point.theta * 100.0, 0) << "% | " << label << " | " << mean_sd(st) << " | "
                   << mean_sd(sf) << " | " << mean_sd(s1) << " | " << fixed(med) << " | " << mean_sd(sl) << " |\n";

                if (design.covariance != CovarianceKind::block_half) continue;
                std::ostringstream sel_row, cor_row;
                sel_row << format_double(point.theta) << ',' << point.models[m];
                cor_row << format_double(point.theta) << ',' << point.models[m];
                std::string sel_md = "| " + fixed(point.theta * 100.0, 0) + "% | " + label + " |";
                std::string cor_md = sel_md;
                for (Index b = 0; b < kBlockCount; ++b) {
                    std::vector<double> counts, fraction;
                    for (const auto& r : recs) {
                        const auto bi = static_cast<std::size_t>(b);
                        counts.push_back(static_cast<double>(r.block_selected[bi]));
                        if (r.block_truth[bi] > 0)
                            fraction.push_back(static_cast<double>(r.block_correct[bi]) /
                                               static_cast<double>(r.block_truth[bi]));
                    }
                    const Summary sc = summarize(counts), sfr = summarize(fraction);
                    sel_row << ',' << format_double(sc.mean) << ',' << format_double(sc.sd);
                    cor_row << ',' << format_double(sfr.mean) << ',' << format_double(sfr.sd);
                    sel_md += " " + mean_sd(sc) + " |";
                    cor_md += " " + mean_sd(sfr) + " |";
                }
                std::vector<double> any_sel, any_cor;
                for (const auto& r : recs) {
                    any_sel.push_back(static_cast<double>(
                        std::count_if(r.block_selected.begin(), r.block_selected.end(), [](Index c) { return c > 0; })));
                    any_cor.push_back(static_cast<double>(
                        std::count_if(r.block_correct.begin(), r.block_correct.end(), [](Index c) { return c > 0; })));
                }
                const Summary gs = summarize(any_sel), gc = summarize(any_cor);
                sel_row << ',' << format_double(gs.mean) << ',' << format_double(gs.sd) << '\n';
                cor_row << ',' << format_double(gc.mean) << ',' << format_double(gc.sd) << '\n';
                gsel_csv << sel_row.str();
                gcor_csv << cor_row.str();
                gsel_md << sel_md << ' ' << mean_sd(gs) << " |\n";
                gcor_md << cor_md << ' ' << mean_sd(gc) << " |\n";
            }
        }

        auto emit = [&](const std::string& file, const std::string& text) {
            const fs::path path = fs::path(out_dir) / file;
            write_text(path, text);
            written.push_back(path.string());
        };
        emit("table_" + design.name + ".csv", csv.str());
        emit("table_" + design.name + ".md", md.str());
        if (design.covariance == CovarianceKind::block_half) {
            emit("groups_selected_" + design.name + ".csv", gsel_csv.str());
            emit("groups_selected_" + design.name + ".md", gsel_md.str());
            emit("groups_correct_" + design.name + ".csv", gcor_csv.str());
            emit("groups_correct_" + design.name + ".md", gcor_md.str());
        }
    }
    return written;
}

std::vector<CensoringRow> censoring_table(const CensoringStudy& study) {
    if (study.datasets < 1) throw ConfigError("censoring study needs at least one dataset");
    std::vector<CensoringRow> rows;
    for (CovarianceKind kind : study.covariances) {
        for (double theta : study.thetas) {
            SimulationConfig config;
            config.n = study.n;
            config.p = study.p;
            config.phi = study.phi;
            config.covariance = kind;
            config.theta = theta;
            const std::uint64_t key = point_seed(study.seed, to_string(kind), theta);
            config.calibration_seed = derive_seed(key, 0xca1bULL);
            config.validate();

            CensoringRow row;
            row.label = to_string(kind);
            row.theta = theta;
            row.nu = calibrate_censoring(config).nu;
            config.nu = row.nu;
            row.proportions.assign(static_cast<std::size_t>(study.datasets), 0.0);
            parallel_for(row.proportions.size(), study.threads, [&](std::size_t d) {
                SimulationConfig c = config;
                c.seed = derive_seed(key, d);
                row.proportions[d] = generate(c).achieved_censoring;
            });
            const Summary s = summarize(row.proportions);
            row.mean = s.mean;
            row.sd = s.sd;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_censoring_table(const std::vector<CensoringRow>& rows, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream csv, md;
    csv << "covariance,theta,nu,censoring_mean,censoring_sd,datasets\n";
    md << "| Case | theta | nu | Censoring mean | Censoring sd |\n|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        csv << r.label << ',' << format_double(r.theta) << ',' << (std::isfinite(r.nu) ? format_double(r.nu) : "inf")
            << ',' << format_double(r.mean) << ',' << format_double(r.sd) << ',' << r.proportions.size() << '\n';
        md << "| " << r.label << " | " << fixed(r.theta * 100.0, 0) << "% cens | " << fixed(r.nu) << " | "
           << fixed(r.mean) << " | " << fixed(r.sd) << " |\n";
    }
    write_text(std::filesystem::path(out_dir) / "censoring.csv", csv.str());
    write_text(std::filesystem::path(out_dir) / "censoring.md", md.str());
}

} // namespace coxpen

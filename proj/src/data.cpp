#include "coxpen/data.hpp"

#include "coxpen/errors.hpp"
#include "coxpen/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace coxpen {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
    if (cell.empty()) {
        throw ValidationError("missing value at row " + std::to_string(row) + ", column " +
                              std::to_string(col));
    }
    if (cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError("malformed number '" + std::string(cell) + "' at row " +
                         std::to_string(row) + ", column " + std::to_string(col));
    }
    if (!std::isfinite(value)) {
        throw ValidationError("non-finite value at row " + std::to_string(row) + ", column " +
                              std::to_string(col));
    }
    return value;
}

} // namespace

void SurvivalDataset::validate(bool require_event) const {
    const Index rows = x.rows();
    if (time.size() != rows || status.size() != rows) {
        throw ValidationError("time/status length does not match covariate rows");
    }
    if (rows < 2) throw ValidationError("need at least 2 subjects");
    if (x.cols() < 1) throw ValidationError("need at least 1 covariate");
    if (!names.empty() && static_cast<Index>(names.size()) != x.cols()) {
        throw ValidationError("column name count does not match covariates");
    }
    for (Index i = 0; i < rows; ++i) {
        if (!(time[i] >= 0.0) || !std::isfinite(time[i])) {
            throw ValidationError("time must be finite and nonnegative (row " + std::to_string(i + 1) + ")");
        }
        if (status[i] != 0 && status[i] != 1) {
            throw ValidationError("status must be 0 or 1 (row " + std::to_string(i + 1) + ")");
        }
    }
    if (!x.allFinite()) throw ValidationError("covariates contain non-finite values");
    if (require_event && status.sum() == 0) {
        throw ValidationError("dataset has no events; partial likelihood is vacuous");
    }
}

SurvivalDataset SurvivalDataset::subset(std::span<const Index> rows) const {
    SurvivalDataset out;
    const auto m = static_cast<Index>(rows.size());
    out.x.resize(m, x.cols());
    out.time.resize(m);
    out.status.resize(m);
    for (Index i = 0; i < m; ++i) {
        out.x.row(i) = x.row(rows[i]);
        out.time[i] = time[rows[i]];
        out.status[i] = status[rows[i]];
    }
    out.names = names;
    return out;
}

SurvivalDataset SurvivalDataset::columns(std::span<const Index> cols) const {
    SurvivalDataset out;
    out.x.resize(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out.x.col(static_cast<Index>(j)) = x.col(cols[j]);
        if (!names.empty()) out.names.push_back(names[cols[j]]);
    }
    out.time = time;
    out.status = status;
    return out;
}

SurvivalDataset SurvivalDataset::make(Eigen::MatrixXd x, Eigen::VectorXd time, Eigen::VectorXi status,
                                      std::vector<std::string> names) {
    SurvivalDataset d;
    d.x = std::move(x);
    d.time = std::move(time);
    d.status = std::move(status);
    if (names.empty()) {
        for (Index j = 0; j < d.x.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
    }
    d.names = std::move(names);
    d.validate();
    return d;
}

SurvivalDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "' is empty; header row required");
    const auto header = split_fields(line);
    if (header.size() < 3) {
        throw ParseError("header must list time, status and at least one covariate");
    }
    const std::size_t width = header.size();
    std::vector<std::string> names;
    for (std::size_t j = 2; j < width; ++j) names.emplace_back(header[j]);

    std::vector<double> cells;
    std::vector<double> times;
    std::vector<int> status;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != width) {
            throw ValidationError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                  " cells, expected " + std::to_string(width));
        }
        times.push_back(parse_cell(fields[0], row, 1));
        const double s = parse_cell(fields[1], row, 2);
        if (s != 0.0 && s != 1.0) {
            throw ValidationError("status must be 0 or 1 at row " + std::to_string(row));
        }
        status.push_back(static_cast<int>(s));
        for (std::size_t j = 2; j < width; ++j) cells.push_back(parse_cell(fields[j], row, j + 1));
    }

    const auto n = static_cast<Index>(times.size());
    const auto p = static_cast<Index>(width - 2);
    Eigen::MatrixXd x(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) x(i, j) = cells[static_cast<std::size_t>(i * p + j)];
    Eigen::VectorXd t = Eigen::Map<Eigen::VectorXd>(times.data(), n);
    Eigen::VectorXi st = Eigen::Map<Eigen::VectorXi>(status.data(), n);
    return SurvivalDataset::make(std::move(x), std::move(t), std::move(st), std::move(names));
}

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw NumericError("cannot format double");
    return std::string(buf, ptr);
}

void save_csv(const SurvivalDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "time,status";
    for (Index j = 0; j < data.p(); ++j) {
        out << ',' << (data.names.empty() ? "x" + std::to_string(j + 1) : data.names[j]);
    }
    out << '\n';
    std::string line;
    for (Index i = 0; i < data.n(); ++i) {
        line = format_double(data.time[i]);
        line += ',';
        line += std::to_string(data.status[i]);
        for (Index j = 0; j < data.p(); ++j) {
            line += ',';
            line += format_double(data.x(i, j));
        }
        line += '\n';
        out << line;
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

Eigen::VectorXd Standardization::to_original(const Eigen::VectorXd& beta_std) const {
    Eigen::VectorXd out = beta_std.cwiseQuotient(scales);
    for (std::size_t j = 0; j < constant.size(); ++j)
        if (constant[j]) out[static_cast<Index>(j)] = 0.0;
    return out;
}

Eigen::VectorXd Standardization::to_standardized(const Eigen::VectorXd& beta_orig) const {
    return beta_orig.cwiseProduct(scales);
}

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - means.transpose()).array().rowwise() / scales.transpose().array();
}

StandardizedData standardize(const SurvivalDataset& data) {
    const Index n = data.n();
    const Index p = data.p();
    if (n < 2) throw ValidationError("standardize needs n >= 2");
    StandardizedData out{data, {}};
    auto& tr = out.transform;
    tr.means = data.x.colwise().mean().transpose();
    tr.scales.resize(p);
    tr.constant.assign(static_cast<std::size_t>(p), false);
    for (Index j = 0; j < p; ++j) {
        auto col = out.data.x.col(j);
        col.array() -= tr.means[j];
        const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
        if (sd <= 1e-12 * std::max(1.0, std::abs(tr.means[j]))) {
            tr.constant[static_cast<std::size_t>(j)] = true;
            tr.scales[j] = 1.0;
            col.setZero();
        } else {
            tr.scales[j] = sd;
            col /= sd;
        }
    }
    return out;
}

Partition split(const SurvivalDataset& data, Index train_size, std::uint64_t seed) {
    const Index n = data.n();
    if (train_size < 1 || train_size >= n) {
        throw ValidationError("train_size must satisfy 1 <= train_size < n (got " +
                              std::to_string(train_size) + ", n=" + std::to_string(n) + ")");
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (int attempt = 0; attempt < kSplitRetries; ++attempt) {
        std::iota(order.begin(), order.end(), Index{0});
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(attempt));
        // Partial Fisher-Yates: the first train_size slots form the train set.
        for (Index i = 0; i < train_size; ++i) {
            std::uniform_int_distribution<Index> pick(i, n - 1);
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
        }
        Partition part;
        part.seed = seed;
        part.train.assign(order.begin(), order.begin() + train_size);
        part.test.assign(order.begin() + train_size, order.end());
        std::sort(part.train.begin(), part.train.end());
        std::sort(part.test.begin(), part.test.end());
        const bool has_event = std::any_of(part.train.begin(), part.train.end(),
                                           [&](Index i) { return data.status[i] == 1; });
        if (has_event) return part;
    }
    throw ValidationError("could not draw a train set containing an event after " +
                          std::to_string(kSplitRetries) + " attempts");
}

} // namespace coxpen

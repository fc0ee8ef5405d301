#pragma once
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>
#include <Eigen/Core>
#include <json.hpp>
#include <kep/experiments.hpp>

namespace kep {

inline constexpr const char* version = "1.0.0";

/// Malformed input file.
class input_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Shortest "%.17g" rendering; round-trips every finite double.
inline std::string format_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const
    {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (header[j] == name) return j;
        }
        throw input_error("column '" + name + "' not found in header");
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace detail

/// Numeric CSV with a header row. Diagnostics name the 1-based line and column.
inline CsvTable parse_csv(std::istream& in)
{
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw input_error("empty CSV");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    for (auto& h : detail::split_csv_line(line)) t.header.push_back(detail::trim(h));
    if (t.header.empty()) throw input_error("CSV header is empty");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != t.header.size()) {
            throw input_error("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                              " fields, found " + std::to_string(cells.size()));
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) {
            const std::string c = detail::trim(cells[j]);
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (c.empty() || used != c.size() || !std::isfinite(v)) {
                throw input_error("line " + std::to_string(lineno) + ", column " + std::to_string(j + 1) + " ('" +
                                  t.header[j] + "'): not a finite number: '" + c + "'");
            }
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open " + path);
    return parse_csv(in);
}

/// Split a table into a feature matrix and the named response.
inline void table_to_xy(const CsvTable& t, const std::string& response, Eigen::MatrixXd& X, Eigen::VectorXd& y,
                        std::vector<std::string>& feature_names)
{
    const std::size_t rc = t.column(response);
    feature_names.clear();
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        if (j != rc) feature_names.push_back(t.header[j]);
    }
    const auto n = static_cast<Eigen::Index>(t.rows.size());
    X.resize(n, static_cast<Eigen::Index>(feature_names.size()));
    y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = t.rows[static_cast<std::size_t>(i)];
        Eigen::Index c = 0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j == rc) {
                y[i] = row[j];
            } else {
                X(i, c++) = row[j];
            }
        }
    }
}

/// One row per method x repeat.
inline void write_runs_csv(std::ostream& out, const SimReport& r)
{
    out << "method,repeat,spe,fse,nonzeros,eta,alpha,sweeps,converged,error\n";
    for (const auto& run : r.runs) {
        out << run.method << ',' << run.repeat << ',';
        if (run.error) {
            out << ",,,,,,," << '"' << *run.error << '"' << '\n';
            continue;
        }
        out << format_double(run.spe) << ',' << format_double(run.fse) << ',' << run.nonzeros << ','
            << format_double(run.eta) << ',' << format_double(run.alpha) << ',' << run.sweeps << ','
            << (run.converged ? 1 : 0) << ",\n";
    }
}

/// Two columns: sweep, objective.
inline void write_trace_csv(std::ostream& out, const std::vector<double>& trace)
{
    out << "sweep,objective\n";
    for (std::size_t t = 0; t < trace.size(); ++t) out << t << ',' << format_double(trace[t]) << '\n';
}

inline nlohmann::ordered_json config_json(const SimConfig& c)
{
    nlohmann::ordered_json j;
    j["n"] = c.n;
    j["m"] = c.m;
    j["p"] = c.p;
    j["snr"] = c.snr;
    j["seed"] = c.seed;
    j["repeats"] = c.repeats;
    if (c.schedule) {
        j["schedule"] = {{"eta_exponent", c.schedule->eta_exponent}, {"alpha_exponent", c.schedule->alpha_exponent}};
    } else {
        j["schedule"] = nullptr;
    }
    j["rho"] = c.rho;
    j["zero_signal"] = c.zero_signal;
    j["grid_lambdas"] = c.grid_lambdas;
    j["grid_alphas"] = c.grid_alphas;
    j["tol"] = c.tol;
    j["max_sweeps"] = c.max_sweeps;
    return j;
}

inline nlohmann::ordered_json aggregates_json(const SimReport& r)
{
    nlohmann::ordered_json j;
    j["protocol"] = r.protocol;
    if (r.protocol == "cv") j["folds"] = r.folds;
    j["config"] = config_json(r.config);
    j["methods"] = nlohmann::ordered_json::array();
    for (const auto& a : r.aggregates) {
        j["methods"].push_back({{"method", a.method},
                                {"repeats_ok", a.repeats_ok},
                                {"repeats_failed", a.repeats_failed},
                                {"mean_spe", a.mean_spe},
                                {"se_spe", a.se_spe},
                                {"mean_fse", a.mean_fse},
                                {"se_fse", a.se_fse}});
    }
    return j;
}

} // namespace kep

#pragma once

// Experiment pipeline: config -> diagonal test operator -> shared Gaussian V_0
// -> one trajectory per method -> bound curves -> run.csv + report.json.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "bounds.hpp"
#include "expansion.hpp"
#include "linalg.hpp"
#include "models.hpp"

namespace expander {

inline constexpr const char* version_string = "expander 0.1.0";

struct ExperimentConfig
{
    Index n = 500;
    Index d = 5;
    Index r = 20;
    std::vector<Index> p_list = {5, 10, 15, 20};
    int q = 30;
    ModelParams model;  ///< n and d are taken from the fields above
    std::string spectrum_file;  ///< model = custom
    std::vector<MethodKind> methods{all_methods.begin(), all_methods.end()};
    std::uint64_t seed = 0;
    NormKind norm = NormKind::Operator;
    std::string out_dir;
    bool emit_vt_bound = true;
    bool emit_kt_bound = true;
    bool timings = false;  ///< fill elapsed_s in run.csv (makes the file run-dependent)
    double rank_cutoff = RankTolerance::default_cutoff;
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true)
    {
        const auto pos = s.find(sep, start);
        std::string item = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (!item.empty())
            out.push_back(std::move(item));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value)
{
    T out{};
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("bad value for '" + key + "': '" + value + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "yes" || value == "on")
        return true;
    if (value == "false" || value == "0" || value == "no" || value == "off")
        return false;
    throw ConfigError("bad boolean for '" + key + "': '" + value + "'");
}

}  // namespace detail

/// Sets one key from its text form. Keys match the config file and the CLI flags.
inline void set_option(ExperimentConfig& cfg, const std::string& key, const std::string& value)
{
    using detail::parse_number;
    try
    {
        if (key == "n") cfg.n = parse_number<Index>(key, value);
        else if (key == "d") cfg.d = parse_number<Index>(key, value);
        else if (key == "r") cfg.r = parse_number<Index>(key, value);
        else if (key == "q") cfg.q = parse_number<int>(key, value);
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "G") cfg.model.G = parse_number<double>(key, value);
        else if (key == "a") cfg.model.ellipsoidal.a = parse_number<double>(key, value);
        else if (key == "b") cfg.model.ellipsoidal.b = parse_number<double>(key, value);
        else if (key == "c") cfg.model.ellipsoidal.c = parse_number<double>(key, value);
        else if (key == "H") cfg.model.ellipsoidal.H = parse_number<double>(key, value);
        else if (key == "poly_c") cfg.model.polynomial.c = parse_number<double>(key, value);
        else if (key == "poly_s") cfg.model.polynomial.s = parse_number<double>(key, value);
        else if (key == "poly_m") cfg.model.polynomial.m = parse_number<double>(key, value);
        else if (key == "rank_cutoff") cfg.rank_cutoff = parse_number<double>(key, value);
        else if (key == "model") cfg.model.model = model_from_string(value);
        else if (key == "spectrum_file") cfg.spectrum_file = value;
        else if (key == "out") cfg.out_dir = value;
        else if (key == "timings") cfg.timings = detail::parse_bool(key, value);
        else if (key == "p")
        {
            cfg.p_list.clear();
            for (const auto& item : detail::split(value, ','))
                cfg.p_list.push_back(parse_number<Index>(key, item));
        }
        else if (key == "methods")
        {
            cfg.methods.clear();
            for (const auto& item : detail::split(value, ','))
            {
                if (item == "all")
                    cfg.methods.assign(all_methods.begin(), all_methods.end());
                else
                    cfg.methods.push_back(method_from_string(item));
            }
        }
        else if (key == "norm")
        {
            if (value == "op") cfg.norm = NormKind::Operator;
            else if (value == "fro") cfg.norm = NormKind::Frobenius;
            else throw ConfigError("norm must be 'op' or 'fro'");
        }
        else if (key == "bounds")
        {
            cfg.emit_vt_bound = cfg.emit_kt_bound = false;
            for (const auto& item : detail::split(value, ','))
            {
                if (item == "vt") cfg.emit_vt_bound = true;
                else if (item == "kt") cfg.emit_kt_bound = true;
                else if (item != "none") throw ConfigError("bounds entries are vt, kt or none");
            }
        }
        else
            throw ConfigError("unknown key '" + key + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

/// Flat key=value text; '#' starts a comment.
inline void parse_config_text(ExperimentConfig& cfg, const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line))
    {
        lineno++;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        try
        {
            set_option(cfg, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig cfg;
    parse_config_text(cfg, ss.str());
    return cfg;
}

/// Empty iff the config is runnable.
inline std::vector<std::string> validate_config(const ExperimentConfig& cfg)
{
    std::vector<std::string> v;
    if (cfg.n < 1) v.push_back("n >= 1 violated: n=" + std::to_string(cfg.n));
    if (cfg.d < 1) v.push_back("d >= 1 violated: d=" + std::to_string(cfg.d));
    if (cfg.d >= cfg.n) v.push_back("d < n violated: d=" + std::to_string(cfg.d) + ", n=" + std::to_string(cfg.n));
    if (cfg.d > cfg.r) v.push_back("d <= r violated: d=" + std::to_string(cfg.d) + ", r=" + std::to_string(cfg.r));
    if (cfg.r > cfg.n) v.push_back("r <= n violated: r=" + std::to_string(cfg.r) + ", n=" + std::to_string(cfg.n));
    for (Index p : cfg.p_list)
    {
        if (cfg.d > p) v.push_back("d <= p violated: d=" + std::to_string(cfg.d) + ", p=" + std::to_string(p));
        if (p > cfg.r) v.push_back("p <= r violated: p=" + std::to_string(p) + ", r=" + std::to_string(cfg.r));
        if (cfg.emit_kt_bound && p > cfg.n - 1)
            v.push_back("p <= n-1 violated: p=" + std::to_string(p) + ", n=" + std::to_string(cfg.n));
    }
    if (cfg.q < 0) v.push_back("q >= 0 violated: q=" + std::to_string(cfg.q));
    if (cfg.methods.empty()) v.push_back("methods must be nonempty");
    if (!(cfg.rank_cutoff > 0.0 && cfg.rank_cutoff < 1.0)) v.push_back("rank_cutoff must lie in (0, 1)");
    if (cfg.model.model == ModelKind::Custom && cfg.spectrum_file.empty())
        v.push_back("model=custom requires spectrum_file");
    return v;
}

struct MethodOutcome
{
    MethodKind method;
    std::optional<ExpansionTrajectory> trajectory;
    std::string error;  ///< nonempty when the run failed
    double wall_seconds = 0.0;

    bool ok() const noexcept { return trajectory.has_value(); }
};

struct RunReport
{
    ExperimentConfig config;
    double mu = std::numeric_limits<double>::quiet_NaN();
    double tan0 = 0.0;  ///< ||tan Theta(X, V_0)||
    std::vector<MethodOutcome> methods;
    std::vector<BoundCurve> bounds;
    std::vector<std::string> violations;  ///< observed values above a bound curve
    std::vector<std::string> notes;
    double total_seconds = 0.0;
    std::string version = version_string;
};

inline Spectrum spectrum_for(const ExperimentConfig& cfg)
{
    if (cfg.model.model == ModelKind::Custom)
    {
        Spectrum s = read_spectrum_csv(cfg.spectrum_file);
        if (s.size() != cfg.n)
            throw ConfigError("spectrum_file has " + std::to_string(s.size()) + " values, n=" + std::to_string(cfg.n));
        Vector v = s.values();
        v.head(cfg.d).array() += cfg.model.G;
        return Spectrum(std::move(v));
    }
    ModelParams p = cfg.model;
    p.n = cfg.n;
    p.d = cfg.d;
    return make_spectrum(p);
}

namespace detail {

inline bool exceeds(double observed, double bound)
{
    return observed > bound * (1.0 + 1e-9) + 1e-12;
}

inline void check_against(RunReport& report, const ExpansionTrajectory& traj, const BoundCurve& curve)
{
    const NormKind norm = report.config.norm;
    for (const auto& pt : curve.points)
    {
        if (pt.t == 0 || pt.t >= static_cast<int>(traj.records.size()))
            continue;
        const double obs = traj.records[pt.t].angles.tan_norm(norm);
        if (exceeds(obs, pt.value))
        {
            std::ostringstream msg;
            msg.precision(17);
            msg << to_string(traj.method) << " exceeds " << curve.label << " at t=" << pt.t << ": " << obs << " > "
                << pt.value;
            report.violations.push_back(msg.str());
        }
    }
}

}  // namespace detail

void write_outputs(const RunReport& report, const std::string& dir);

/// Runs every configured method from one shared Gaussian V_0, computes the bound
/// curves and checks the observed tangents against them. Writes run.csv and
/// report.json when config.out_dir is set. A failing method is recorded in its
/// MethodOutcome and the remaining methods still run.
inline RunReport run_experiment(const ExperimentConfig& cfg)
{
    if (auto v = validate_config(cfg); !v.empty())
    {
        std::string msg = "invalid config:";
        for (const auto& s : v)
            msg += " " + s + ";";
        throw ConfigError(msg);
    }
    const auto start = std::chrono::steady_clock::now();
    const RankTolerance tol(cfg.rank_cutoff);

    RunReport report;
    report.config = cfg;
    const Spectrum spectrum = spectrum_for(cfg);
    const HermitianOperator a = HermitianOperator::diagonal(spectrum);
    const Subspace x = target_subspace(a, cfg.d);
    const Subspace v0 = gaussian_subspace(cfg.n, cfg.r, cfg.seed, tol);
    report.mu = mu_d(spectrum, cfg.d);
    report.tan0 = principal_angles(x, v0).tan_norm(cfg.norm);

    std::vector<std::future<MethodOutcome>> jobs;
    for (MethodKind m : cfg.methods)
    {
        jobs.push_back(std::async(std::launch::async, [&, m] {
            MethodOutcome out{m, std::nullopt, {}, 0.0};
            const auto t0 = std::chrono::steady_clock::now();
            try
            {
                out.trajectory = run_method(a, x, v0, m, cfg.q, tol);
            } catch (const std::exception& e) {
                out.error = e.what();
            }
            out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            return out;
        }));
    }
    for (auto& job : jobs)
        report.methods.push_back(job.get());

    if (cfg.emit_vt_bound)
    {
        if (std::isfinite(report.tan0))
            report.bounds.push_back(vt_bound_curve(spectrum, cfg.d, cfg.q, report.tan0));
        else
            report.notes.push_back("UB_Vt skipped: X meets V_0-perp (infinite tangent)");
    }
    if (cfg.emit_kt_bound)
    {
        for (Index p : cfg.p_list)
        {
            try
            {
                const Subspace hp = construct_Hp(a, v0, cfg.d, p, tol);
                const double tan_hp = principal_angles(x, hp).tan_norm(cfg.norm);
                report.bounds.push_back(kt_bound_curve(spectrum, cfg.d, p, cfg.q, tan_hp, report.tan0));
            } catch (const Error& e) {
                report.notes.push_back("UB_Kt_p" + std::to_string(p) + " skipped: " + e.what());
            }
        }
    }

    for (const auto& outcome : report.methods)
    {
        if (!outcome.ok())
            continue;
        for (const auto& curve : report.bounds)
        {
            const bool applies = (curve.kind == BoundKind::OptimalExpansion && outcome.method == MethodKind::OptimalTheoretical)
                                 || (curve.kind == BoundKind::BlockKrylov && outcome.method == MethodKind::BlockKrylov);
            if (applies)
                detail::check_against(report, *outcome.trajectory, curve);
        }
    }

    report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!cfg.out_dir.empty())
        write_outputs(report, cfg.out_dir);
    return report;
}

// ---------------------------------------------------------------------------
// run.csv

inline constexpr const char* csv_header = "kind,label,t,dim,theta_max,theta_all,tan_norm,elapsed_s";

/// 17 significant digits, "." decimal point, no locale.
inline std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

inline void emit_csv(const RunReport& report, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("emit_csv: cannot open " + path);
    out << csv_header << '\n';
    const NormKind norm = report.config.norm;
    for (const auto& m : report.methods)
    {
        if (!m.ok())
        {
            out << "failed," << to_string(m.method) << ",,,,,,\n";
            continue;
        }
        for (const auto& rec : m.trajectory->records)
        {
            std::string all;
            for (Index i = 0; i < rec.angles.size(); i++)
                all += (i ? ";" : "") + format_double(rec.angles.angles(i));
            out << "observed," << to_string(m.method) << ',' << rec.t << ',' << rec.dim << ','
                << format_double(rec.angles.theta_max()) << ',' << all << ','
                << format_double(rec.angles.tan_norm(norm)) << ','
                << (report.config.timings ? format_double(rec.elapsed) : std::string()) << '\n';
        }
    }
    for (const auto& b : report.bounds)
        for (const auto& pt : b.points)
            out << "bound," << b.label << ',' << pt.t << ",,,," << format_double(pt.value) << ",\n";
    if (!out)
        throw std::runtime_error("emit_csv: write failed for " + path);
}

/// One parsed line of run.csv; empty fields come back as nullopt.
struct CsvRow
{
    std::string kind;
    std::string label;
    std::optional<int> t;
    std::optional<Index> dim;
    std::optional<double> theta_max;
    std::vector<double> theta_all;
    std::optional<double> tan_norm;
    std::optional<double> elapsed;
};

namespace detail {

inline double parse_double_field(const std::string& s)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("run.csv: bad number '" + s + "'");
    return v;
}

inline std::vector<std::string> split_keep_empty(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true)
    {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos)
            return out;
        start = pos + 1;
    }
}

}  // namespace detail

inline std::vector<CsvRow> read_run_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("read_run_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != csv_header)
        throw std::runtime_error("read_run_csv: unexpected header in " + path);
    std::vector<CsvRow> rows;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        const auto f = detail::split_keep_empty(line, ',');
        if (f.size() != 8)
            throw std::runtime_error("read_run_csv: expected 8 fields: " + line);
        CsvRow row;
        row.kind = f[0];
        row.label = f[1];
        if (!f[2].empty()) row.t = std::stoi(f[2]);
        if (!f[3].empty()) row.dim = std::stoll(f[3]);
        if (!f[4].empty()) row.theta_max = detail::parse_double_field(f[4]);
        for (const auto& item : detail::split(f[5], ';'))
            row.theta_all.push_back(detail::parse_double_field(item));
        if (!f[6].empty()) row.tan_norm = detail::parse_double_field(f[6]);
        if (!f[7].empty()) row.elapsed = detail::parse_double_field(f[7]);
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// report.json

inline nlohmann::json config_to_json(const ExperimentConfig& cfg)
{
    nlohmann::json j;
    j["n"] = cfg.n;
    j["d"] = cfg.d;
    j["r"] = cfg.r;
    j["p"] = cfg.p_list;
    j["q"] = cfg.q;
    j["model"] = to_string(cfg.model.model);
    j["G"] = cfg.model.G;
    j["ellipsoidal"] = {{"a", cfg.model.ellipsoidal.a}, {"b", cfg.model.ellipsoidal.b},
                        {"c", cfg.model.ellipsoidal.c}, {"H", cfg.model.ellipsoidal.H}};
    j["polynomial"] = {{"c", cfg.model.polynomial.c}, {"s", cfg.model.polynomial.s}, {"m", cfg.model.polynomial.m}};
    if (!cfg.spectrum_file.empty())
        j["spectrum_file"] = cfg.spectrum_file;
    std::vector<std::string> methods;
    for (MethodKind m : cfg.methods)
        methods.emplace_back(to_string(m));
    j["methods"] = methods;
    j["seed"] = cfg.seed;
    j["norm"] = cfg.norm == NormKind::Operator ? "op" : "fro";
    j["bounds"] = {{"vt", cfg.emit_vt_bound}, {"kt", cfg.emit_kt_bound}};
    j["rank_cutoff"] = cfg.rank_cutoff;
    return j;
}

inline nlohmann::json report_to_json(const RunReport& report)
{
    nlohmann::json j;
    j["version"] = report.version;
    j["config"] = config_to_json(report.config);
    j["mu_d"] = report.mu;
    j["tan0"] = report.tan0;
    const NormKind norm = report.config.norm;
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& m : report.methods)
    {
        nlohmann::json jm;
        jm["method"] = to_string(m.method);
        jm["status"] = m.ok() ? "ok" : "failed";
        jm["wall_seconds"] = m.wall_seconds;
        if (!m.ok())
        {
            jm["error"] = m.error;
        } else {
            nlohmann::json recs = nlohmann::json::array();
            for (const auto& rec : m.trajectory->records)
            {
                std::vector<double> angles(rec.angles.angles.data(), rec.angles.angles.data() + rec.angles.size());
                recs.push_back({{"t", rec.t}, {"dim", rec.dim}, {"theta_max", rec.angles.theta_max()},
                                {"theta_all", angles}, {"tan_norm", rec.angles.tan_norm(norm)},
                                {"elapsed_s", rec.elapsed}});
            }
            jm["records"] = recs;
        }
        methods.push_back(jm);
    }
    j["methods"] = methods;
    nlohmann::json bounds = nlohmann::json::array();
    for (const auto& b : report.bounds)
    {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& pt : b.points)
            pts.push_back({{"t", pt.t}, {"value", pt.value}});
        bounds.push_back({{"label", b.label}, {"kind", b.kind == BoundKind::OptimalExpansion ? "optimal" : "krylov"},
                          {"d", b.d}, {"p", b.p}, {"base", b.base}, {"points", pts}});
    }
    j["bounds"] = bounds;
    j["violations"] = report.violations;
    j["notes"] = report.notes;
    j["total_seconds"] = report.total_seconds;
    return j;
}

inline void write_outputs(const RunReport& report, const std::string& dir)
{
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    emit_csv(report, (base / "run.csv").string());
    std::ofstream out(base / "report.json");
    if (!out)
        throw std::runtime_error("cannot write report.json in " + dir);
    out << report_to_json(report).dump(2) << '\n';
}

}  // namespace expander

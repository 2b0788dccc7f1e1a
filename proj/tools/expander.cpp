// expander: command-line front end for the experiment harness.
//
//   expander run --config FILE [overrides...]
//   expander validate --config FILE
//   expander models --list
//
// Exit codes: 0 ok, 2 invalid config, 3 numerical failure or bound violation.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "expander/harness.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

int print_violations(const std::vector<std::string>& v)
{
    for (const auto& s : v)
        std::cerr << "config: " << s << '\n';
    return exit_config;
}

expander::ExperimentConfig base_config(const std::string& path)
{
    return path.empty() ? expander::ExperimentConfig{} : expander::load_config(path);
}

int do_run(const std::string& config_path, const std::map<std::string, std::string>& overrides)
{
    using namespace expander;
    ExperimentConfig cfg;
    try
    {
        cfg = base_config(config_path);
        for (const auto& [key, value] : overrides)
            set_option(cfg, key, value);
    } catch (const Error& e) {
        std::cerr << "config: " << e.what() << '\n';
        return exit_config;
    }
    if (auto v = validate_config(cfg); !v.empty())
        return print_violations(v);

    RunReport report;
    try
    {
        report = run_experiment(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config: " << e.what() << '\n';
        return exit_config;
    } catch (const InvalidModel& e) {
        std::cerr << "config: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numerical;
    }

    std::cout << "mu_d = " << format_double(report.mu) << ", ||tan Theta(X, V_0)|| = " << format_double(report.tan0)
              << '\n';
    bool failed = false;
    for (const auto& m : report.methods)
    {
        if (!m.ok())
        {
            std::cout << to_string(m.method) << ": FAILED (" << m.error << ")\n";
            failed = true;
            continue;
        }
        const auto& last = m.trajectory->records.back();
        std::cout << to_string(m.method) << ": dim " << last.dim << ", theta_max " << format_double(last.angles.theta_max())
                  << " after t=" << last.t << '\n';
    }
    for (const auto& note : report.notes)
        std::cout << "note: " << note << '\n';
    for (const auto& v : report.violations)
        std::cerr << "bound violation: " << v << '\n';
    if (!cfg.out_dir.empty())
        std::cout << "wrote " << cfg.out_dir << "/run.csv and " << cfg.out_dir << "/report.json\n";
    return failed || !report.violations.empty() ? exit_numerical : 0;
}

int do_validate(const std::string& config_path)
{
    try
    {
        const auto cfg = expander::load_config(config_path);
        if (auto v = expander::validate_config(cfg); !v.empty())
            return print_violations(v);
    } catch (const expander::Error& e) {
        std::cerr << "config: " << e.what() << '\n';
        return exit_config;
    }
    std::cout << "ok\n";
    return 0;
}

void list_models()
{
    std::cout << "linear       A_ii = 3000 - (3/5) i\n"
                 "ellipsoidal  A_ii = b (1 - (a + c (i/n)^2))^(1/2) - H   keys: a b c H\n"
                 "polynomial   A_ii = c / ((i + s)^(1/2) + m)             keys: poly_c poly_s poly_m\n"
                 "custom       one-column CSV                              key: spectrum_file\n"
                 "All models add G to the top d entries.\n";
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Block subspace expansion experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::map<std::string, std::string> overrides;

    auto* run = app.add_subcommand("run", "run an experiment");
    run->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    for (const char* key : {"n", "d", "r", "p", "q", "model", "G", "seed", "methods", "norm", "out"})
    {
        run->add_option_function<std::string>(std::string("--") + key,
                                              [&overrides, key](const std::string& v) { overrides[key] = v; });
    }
    bool timings = false;
    run->add_flag("--timings", timings, "fill elapsed_s in run.csv");

    auto* validate = app.add_subcommand("validate", "check a config file");
    validate->add_option("--config", config_path)->required()->check(CLI::ExistingFile);

    auto* models = app.add_subcommand("models", "describe the test operators");
    bool list = false;
    models->add_flag("--list", list);

    try
    {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    if (run->parsed())
    {
        if (timings)
            overrides["timings"] = "true";
        return do_run(config_path, overrides);
    }
    if (validate->parsed())
        return do_validate(config_path);
    list_models();
    return 0;
}

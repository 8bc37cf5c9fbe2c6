// echotop command line driver
//
// Subcommands:
//   quantum       exact echo trace (single packet or random ensemble)
//   classical     Monte-Carlo classical fidelity of the matching ensemble
//   theory        semiclassical bundle only, no evolution
//   correlation   two-time correlation surface of the perturbation
//   sweep         one quantum run per value of delta / S / seed
//   preset NAME   named standard runs: freeze, random-plateau, random-decay
//
// Every config key is also a flag of the same name; --config loads a flat
// key=value file first, flags override it. Default output directory comes
// from $ECHOTOP_OUTPUT_DIR (falls back to the working directory).
//
// Exit codes: 0 ok, 2 bad config/usage, 3 resource guard refused the run.

#include <echotop/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

struct FlagBag {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> entries; // applied in order
};

void add_config_flags(CLI::App* sub, FlagBag& bag) {
    sub->add_option("--config", bag.config_file, "flat key=value config file");
    static const char* value_keys[] = {
        "S",          "alpha",         "beta",       "gamma",      "j_ref",
        "delta",      "delta_times_S", "state",      "theta_star", "phi_star",
        "seed",       "members",       "t_max",      "stride",     "output_dir",
        "label",      "overlay",       "cl_members", "cl_t_max",   "cl_stride",
        "sweep_axis", "sweep_values"};
    for (const char* key : value_keys) {
        sub->add_option_function<std::string>(
            std::string("--") + key,
            [&bag, key](const std::string& v) { bag.entries.emplace_back(key, v); },
            std::string("config key '") + key + "'");
    }
    static const char* flag_keys[] = {"force", "keep_members", "eigen_kick"};
    for (const char* key : flag_keys) {
        sub->add_flag_callback(
            std::string("--") + key,
            [&bag, key] { bag.entries.emplace_back(key, "1"); },
            std::string("config key '") + key + "' (sets it to 1)");
    }
}

echotop::ExperimentConfig build_config(const FlagBag& bag, echotop::ExperimentConfig base) {
    if (!bag.config_file.empty()) base = echotop::parse_config_file(bag.config_file, base);
    for (const auto& [k, v] : bag.entries) echotop::apply_config_entry(base, k, v);
    return base;
}

void report(const echotop::RunResult& r) {
    for (const std::string& f : r.files) std::cout << "wrote: " << f << "\n";
    if (!r.summary.is_null()) std::cout << r.summary.dump(2) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"echotop: fidelity freeze laboratory for the integrable kicked top"};
    app.set_version_flag("--version", echotop::kVersion);
    app.require_subcommand(1);

    FlagBag bag_q, bag_c, bag_t, bag_x, bag_s, bag_p;
    std::string preset_name;

    CLI::App* sub_q = app.add_subcommand("quantum", "exact echo trace(s)");
    add_config_flags(sub_q, bag_q);
    CLI::App* sub_c = app.add_subcommand("classical", "Monte-Carlo classical fidelity");
    add_config_flags(sub_c, bag_c);
    CLI::App* sub_t = app.add_subcommand("theory", "semiclassical predictions only");
    add_config_flags(sub_t, bag_t);
    CLI::App* sub_x = app.add_subcommand("correlation", "two-time correlation surface");
    add_config_flags(sub_x, bag_x);
    CLI::App* sub_s = app.add_subcommand("sweep", "parameter sweep table");
    add_config_flags(sub_s, bag_s);
    CLI::App* sub_p = app.add_subcommand("preset", "named standard run");
    sub_p->add_option("name", preset_name, "freeze | random-plateau | random-decay")->required();
    add_config_flags(sub_p, bag_p);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // help/version exit cleanly, usage errors are 2
    }

    try {
        using echotop::ExperimentConfig;
        using echotop::RunMode;
        ExperimentConfig cfg;
        if (sub_q->parsed()) {
            cfg = build_config(bag_q, {});
            cfg.mode = RunMode::Quantum;
        } else if (sub_c->parsed()) {
            cfg = build_config(bag_c, {});
            cfg.mode = RunMode::Classical;
        } else if (sub_t->parsed()) {
            cfg = build_config(bag_t, {});
            cfg.mode = RunMode::Theory;
        } else if (sub_x->parsed()) {
            cfg = build_config(bag_x, {});
            cfg.mode = RunMode::Correlation;
        } else if (sub_s->parsed()) {
            cfg = build_config(bag_s, {});
            cfg.mode = RunMode::Sweep;
        } else {
            cfg = build_config(bag_p, echotop::preset_config(preset_name));
        }

        report(echotop::run_experiment(cfg));

        // the freeze preset pairs the quantum trace with the classical decay that
        // keeps going; the classical leg gets its own label so manifests don't clash
        if (sub_p->parsed() && preset_name == "freeze") {
            ExperimentConfig cl = cfg;
            cl.mode = RunMode::Classical;
            cl.label += "_cl";
            report(echotop::run_experiment(cl));
        }
        return 0;
    } catch (const echotop::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const echotop::ResourceRefusal& e) {
        std::cerr << "resource refusal: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

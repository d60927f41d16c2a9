#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clicotea/clicotea.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Options {
    std::string config_path;
    std::vector<std::string> overrides;
    bool force = false;
};

int run_stage(const std::string& name, const Options& opt) {
    std::vector<clicotea::config::Diagnostic> diags;
    clicotea::config::PipelineConfig cfg;
    try {
        cfg = clicotea::config::load_config(opt.config_path, opt.overrides, diags);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    if (!diags.empty()) {
        for (const auto& d : diags) std::fprintf(stderr, "config error: %s\n", d.format().c_str());
        return kExitUsage;
    }

    try {
        const auto result = clicotea::pipeline::run_subcommand(name, cfg, opt.force);
        if (result.skipped) {
            std::printf("[%s] up to date, skipped (rerun with --force)\n", name.c_str());
        } else if (result.fragment.contains("timings")) {
            const double secs =
                static_cast<double>(result.fragment["timings"].value("wall_ms", std::int64_t{0})) / 1000.0;
            std::printf("[%s] done in %.1fs\n", name.c_str(), secs);
        } else {
            std::printf("[%s] done\n", name.c_str());
        }
        if (name == "report")
            std::printf("report written to %s\n",
                        clicotea::pipeline::artifact_path(cfg, "report.json").string().c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-lingual token embedding alignment pipeline"};
    app.require_subcommand(1);

    Options opt;
    std::string chosen;
    for (const auto& name : clicotea::pipeline::subcommands()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "pipeline config file")->required();
        sub->add_option("--set", opt.overrides, "override a config field, e.g. --set training.lr=1e-4");
        sub->add_flag("--force", opt.force, "rerun even when artifacts are up to date");
        sub->callback([&chosen, name] { chosen = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    return run_stage(chosen, opt);
}

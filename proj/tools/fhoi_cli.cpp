#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fhoi/cli.hpp"

namespace {

fhoi::RunConfig resolve_config(const std::string& path,
                               const std::vector<std::string>& sets,
                               const fhoi::RunConfig& base) {
    if (path.empty()) return fhoi::apply_config_overrides(base, sets);
    return fhoi::load_run_config(path, sets);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot human-object interaction pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "JSON config file")
        ->expected(1);
    app.add_option("--set", sets, "override config field, key=value");

    std::string out_dir, data_dir, ckpt, report_path, csv_path;
    std::size_t scene_index = 0;
    double tol = 1e-4;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->fallthrough();
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "train on a dataset");
    train->fallthrough();
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--out", ckpt, "checkpoint output path")->required();

    auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
    evalc->fallthrough();
    evalc->add_option("--ckpt", ckpt, "checkpoint path")->required();
    evalc->add_option("--data", data_dir, "dataset directory")->required();
    evalc->add_option("--report", report_path, "report JSON output path");

    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    grad->fallthrough();
    grad->add_option("--tol", tol, "max relative error tolerance");

    auto* nom = app.add_subcommand("nominate", "print object/verb nominations");
    nom->fallthrough();
    nom->add_option("--data", data_dir, "dataset directory")->required();
    nom->add_option("--scene", scene_index, "training scene index");

    auto* att = app.add_subcommand("export-attention", "dump co-attention maps");
    att->fallthrough();
    att->add_option("--data", data_dir, "dataset directory")->required();
    att->add_option("--ckpt", ckpt, "checkpoint path (optional)");
    att->add_option("--scene", scene_index, "training scene index");
    att->add_option("--out", out_dir, "output directory")->required();

    auto* abl = app.add_subcommand("ablate", "factor ablation sweep");
    abl->fallthrough();
    abl->add_option("--data", data_dir, "dataset directory")->required();
    abl->add_option("--out", csv_path, "CSV output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        const fhoi::RunConfig base =
            grad->parsed() ? fhoi::gradcheck_profile() : fhoi::RunConfig{};
        const fhoi::RunConfig cfg = resolve_config(config_path, sets, base);
        if (gen->parsed()) return fhoi::cmd_gen_data(cfg, out_dir, std::cout);
        if (train->parsed()) return fhoi::cmd_train(cfg, data_dir, ckpt, std::cout);
        if (evalc->parsed())
            return fhoi::cmd_eval(cfg, ckpt, data_dir, report_path, std::cout);
        if (grad->parsed()) return fhoi::cmd_gradcheck(cfg, tol, std::cout);
        if (nom->parsed())
            return fhoi::cmd_nominate(cfg, data_dir, scene_index, std::cout);
        if (att->parsed())
            return fhoi::cmd_export_attention(cfg, data_dir, ckpt, scene_index,
                                              out_dir, std::cout);
        if (abl->parsed()) return fhoi::cmd_ablate(cfg, data_dir, csv_path, std::cout);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const fhoi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const fhoi::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const fhoi::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const fhoi::ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return 3;
    } catch (const fhoi::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

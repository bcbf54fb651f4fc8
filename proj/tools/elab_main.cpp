// elab command line: configuration-driven experiments around the
// encouraging-loss family. Every flag mirrors a config-file key
// (--batch-size <-> batch_size); flags override file values.

#include <cstdio>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "elab/config.hpp"
#include "elab/data.hpp"
#include "elab/network.hpp"
#include "elab/runner.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitIo = 4;
constexpr int kExitRuntime = 5;

const std::set<std::string> kSubcommands{"train", "gradcheck", "margins", "energy", "ece",
                                         "ood",   "attack",    "probe",   "sweep"};

const std::set<std::string> kKeys{
    "loss",        "bonus",          "le",           "bonus_threshold", "gamma",
    "phi",         "label_smoothing", "mse_norm",    "dataset",         "idx_images",
    "idx_labels",  "blob_classes",   "blob_dim",     "blob_count",      "blob_stddev",
    "blob_radius", "blob_means",     "imb_ratio",    "split",           "hidden",
    "lr",          "lr_scale",       "momentum",     "epochs",          "batch_size",
    "seed",        "class_weights",  "reweight_start", "schedule",      "diagnostics",
    "ece_bins",    "indicator",      "ood_shift",    "ood_images",      "ood_labels",
    "margin_bin_width", "attack",    "norm",         "eps",             "steps",
    "step_size",   "random_start",   "clip_lo",      "clip_hi",         "attack_train_loss",
    "probe_balanced", "axis",        "values",       "run_id",          "out",
    "force",       "config"};

void print_usage() {
    std::cerr
        << "Usage: elab <subcommand> [--key value]...\n"
        << "Subcommands:\n"
        << "  train      run a full experiment (diagnostics per --diagnostics)\n"
        << "  gradcheck  finite-difference check of the configured loss\n"
        << "  margins | energy | ece | ood | attack | probe\n"
        << "             run an experiment and emit that diagnostic\n"
        << "  sweep      repeat a run along --axis over --values\n"
        << "Common flags: --loss {ce|el|focal|hfl|mse|mse_mirror} --bonus {none|normal|\n"
        << "  conservative|aggressive} --le --bonus-threshold --gamma --phi\n"
        << "  --label-smoothing --mse-norm {softmax|sigmoid} --dataset {blobs|imb-blobs|idx}\n"
        << "  --idx-images --idx-labels --hidden \"64,64\" --lr --lr-scale --momentum\n"
        << "  --epochs --batch-size --seed --class-weights --reweight-start --ece-bins\n"
        << "  --indicator --attack {fgsm|pgd} --norm {linf|l2} --eps LIST --steps\n"
        << "  --step-size --out DIR --force --config FILE\n";
}

std::string flag_to_key(const std::string& flag) {
    std::string key = flag.substr(2);
    for (char& c : key)
        if (c == '-') c = '_';
    return key;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        print_usage();
        return kExitUsage;
    }
    const std::string sub = argv[1];
    if (sub == "--help" || sub == "-h" || sub == "help") {
        print_usage();
        return 0;
    }
    if (!kSubcommands.count(sub)) {
        std::cerr << "error: unknown subcommand '" << sub << "'\n";
        print_usage();
        return kExitUsage;
    }

    std::vector<std::pair<std::string, std::string>> flags;
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.rfind("--", 0) != 0) {
            std::cerr << "error: expected a --flag, got '" << arg << "'\n";
            return kExitUsage;
        }
        const std::string key = flag_to_key(arg);
        if (!kKeys.count(key)) {
            std::cerr << "error: unknown flag '" << arg << "'\n";
            return kExitUsage;
        }
        if (key == "force") {
            flags.emplace_back(key, "true");
            continue;
        }
        if (i + 1 >= argc) {
            std::cerr << "error: flag '" << arg << "' needs a value\n";
            return kExitUsage;
        }
        flags.emplace_back(key, argv[++i]);
    }

    std::string stage = "configure";
    try {
        elab::Config cfg;
        for (const auto& [k, v] : flags)
            if (k == "config") cfg = elab::Config::parse_file(v);
        for (const auto& [k, v] : flags)
            if (k != "config") cfg.set(k, v);

        const bool force = cfg.has("force") && cfg.get_bool("force");
        const std::string out = cfg.get("out", "");

        if (sub == "gradcheck") {
            const elab::Config resolved = elab::resolve_config(cfg);
            const elab::LossSpec spec = elab::loss_from_config(resolved);
            stage = "gradcheck";
            const double dev = elab::gradcheck_report(spec, resolved.get_u64("seed"));
            std::printf("max finite-difference deviation: %.3e (%s)\n", dev,
                        dev < 1e-4 ? "ok" : "FAIL");
            return dev < 1e-4 ? 0 : 1;
        }

        if (out.empty()) throw elab::ConfigError("--out is required for this subcommand");

        if (sub == "sweep") {
            if (!cfg.has("axis")) throw elab::ConfigError("sweep needs --axis");
            if (!cfg.has("values")) throw elab::ConfigError("sweep needs --values");
            const std::string axis = cfg.get("axis");
            const auto values = cfg.get_string_list("values");
            elab::Config base = cfg;
            base.erase("axis");
            base.erase("values");
            const auto bundles = elab::run_sweep(base, axis, values, out, force, &stage);
            std::printf("sweep %s over %zu values -> %s/comparison.csv\n", axis.c_str(),
                        bundles.size(), out.c_str());
            return 0;
        }

        if (sub != "train") cfg.set("diagnostics", sub);
        const elab::Config resolved = elab::resolve_config(cfg);
        const elab::ResultBundle bundle = elab::run_experiment(resolved, out, force, &stage);
        std::printf("run %s: test_acc=%s (%zu artifacts in %s)\n",
                    resolved.get("run_id").c_str(),
                    elab::fmt9(bundle.metrics.at("test_acc")).c_str(), bundle.artifacts.size(),
                    out.c_str());
        return 0;
    } catch (const elab::ConfigError& e) {
        std::cerr << "error in stage '" << stage << "': " << e.what() << "\n";
        return kExitConfig;
    } catch (const elab::IdxParseError& e) {
        std::cerr << "error in stage '" << stage << "': " << e.what() << "\n";
        return kExitIo;
    } catch (const elab::IoError& e) {
        std::cerr << "error in stage '" << stage << "': " << e.what() << "\n";
        return kExitIo;
    } catch (const elab::TrainError& e) {
        std::cerr << "error in stage '" << stage << "': " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error in stage '" << stage << "': " << e.what() << "\n";
        return kExitConfig;
    }
}

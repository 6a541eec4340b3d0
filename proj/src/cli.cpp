#include "fsa/cli.hpp"

#include "fsa/dataset.hpp"
#include "fsa/errors.hpp"
#include "fsa/evaluation.hpp"
#include "fsa/image_io.hpp"
#include "fsa/selftest.hpp"
#include "fsa/training.hpp"
#include "fsa/weights.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fsa {

namespace {

namespace fs = std::filesystem;

std::optional<double> parse_real(std::string_view text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

std::string valid_methods() {
    std::string out;
    for (Method m : kAllMethods) out += (out.empty() ? "" : ", ") + std::string(to_string(m));
    return out;
}

Method require_method(const std::string& text) {
    if (auto m = parse_method(text)) return *m;
    throw ArgumentError("unknown method '" + text + "'; valid methods: " + valid_methods());
}

DctMode require_mode(const std::string& text) {
    if (auto m = parse_dct_mode(text)) return *m;
    throw ArgumentError("unknown DCT mode '" + text + "'; valid modes: ortho, paper");
}

double require_budget(const std::string& text, const char* flag) {
    const auto v = parse_real_or_fraction(text);
    if (!v) throw ArgumentError(std::string(flag) + ": cannot parse '" + text + "' (use 0.0314 or 8/255)");
    return *v;
}

// Options shared by attack, sweep and compare.
struct AttackFlags {
    std::string weights, images, labels;
    std::string method = "IFGSM";
    std::string methods = "MIFGSM,DIFGSM,TIFGSM,IFGSM,PGD";
    std::string eps = "1/255";
    std::string eps_list = "1/255,2/255";
    std::string steps_list = "5,10,16";
    std::size_t steps = 5;
    std::string alpha;
    bool fsa = false;
    std::string dct_mode = "paper";
    std::uint64_t seed = 0;
    double mi_decay = 1.0;
    double di_prob = 0.5;
    std::size_t ti_kernel = 7;
    bool no_random_start = false;
    std::string out;
    std::string save_adv;
    std::string delta_csv;
    std::size_t limit = 0;
    std::size_t workers = 1;
    bool record_timing = false;
    std::string model_id;
};

void add_data_options(CLI::App* app, AttackFlags& f) {
    app->add_option("--weights", f.weights, "Weight file (FSAW format)")->required();
    app->add_option("--images", f.images, "IDX image file")->required();
    app->add_option("--labels", f.labels, "IDX label file")->required();
    app->add_option("--limit", f.limit, "Use only the first N images (0 = all)");
    app->add_option("--workers", f.workers, "Worker threads");
    app->add_option("--model-id", f.model_id, "Model id written to reports (default: weight file stem)");
}

void add_method_options(CLI::App* app, AttackFlags& f) {
    app->add_option("--dct-mode", f.dct_mode, "DCT normalization: paper or ortho");
    app->add_option("--seed", f.seed, "Random seed");
    app->add_option("--mi-decay", f.mi_decay, "MI-FGSM momentum decay");
    app->add_option("--di-prob", f.di_prob, "DI-FGSM transform probability");
    app->add_option("--ti-kernel", f.ti_kernel, "TI-FGSM Gaussian kernel size (odd)");
    app->add_flag("--no-random-start", f.no_random_start, "Disable the PGD random start");
}

AttackConfig base_config(const AttackFlags& f) {
    AttackConfig cfg;
    cfg.dct_mode = require_mode(f.dct_mode);
    cfg.seed = f.seed;
    cfg.mi_decay = f.mi_decay;
    cfg.di_prob = f.di_prob;
    cfg.ti_kernel_size = f.ti_kernel;
    cfg.pgd_random_start = !f.no_random_start;
    return cfg;
}

void warn_if_degenerate(const AttackConfig& cfg, bool fsa_used, std::ostream& err) {
    if (fsa_used && cfg.dct_mode == DctMode::Ortho) {
        err << "warning: with --dct-mode ortho the frequency pullback is the identity, so the consistency mask is "
               "all ones and FSA reduces to the base attack\n";
    }
}

struct Loaded {
    Classifier model;
    Dataset data;
    EvalOptions options;
};

Loaded load_inputs(const AttackFlags& f) {
    Classifier model = load_weights(f.weights);
    Dataset data = head(load_idx(f.images, f.labels), f.limit);
    EvalOptions options;
    options.model_id = f.model_id.empty() ? fs::path(f.weights).stem().string() : f.model_id;
    options.workers = f.workers;
    return {std::move(model), std::move(data), std::move(options)};
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot open " + path + " for writing");
    file << text;
    if (!file) throw IoError("failed writing " + path);
}

void save_adversarials(const EvalReport& report, const std::string& dir) {
    fs::create_directories(dir);
    for (const ImageRecord& rec : report.records) {
        if (rec.adversarial.empty()) continue;
        char name[64];
        std::snprintf(name, sizeof name, "%05zu_label%zu_pred%zu.png", rec.index, rec.label, rec.adv_pred);
        write_png(rec.adversarial, fs::path(dir) / name);
    }
}

int cmd_train(const std::string& arch_name, const std::string& images, const std::string& labels,
              const std::string& test_images, const std::string& test_labels, const TrainOptions& options,
              std::size_t limit, const std::string& out_path, std::ostream& out) {
    const auto arch = architecture_by_name(arch_name);
    if (!arch) throw ArgumentError("unknown architecture '" + arch_name + "'; valid: mlp, cnn");
    if (test_images.empty() != test_labels.empty()) {
        throw ArgumentError("--test-images and --test-labels must be given together");
    }
    const Dataset train_data = head(load_idx(images, labels), limit);
    std::optional<Dataset> test_data;
    if (!test_images.empty()) test_data = load_idx(test_images, test_labels);

    TrainOptions opts = options;
    opts.on_epoch = [&](std::size_t epoch, const Classifier& model) {
        out << "epoch " << epoch << " train_loss " << mean_loss(model, train_data.images) << " train_acc "
            << accuracy(model, train_data.images);
        if (test_data) out << " test_acc " << accuracy(model, test_data->images);
        out << '\n';
    };
    const Classifier model = train(*arch, train_data.images, opts);
    save_weights(model, out_path);
    out << "saved " << out_path << '\n';
    return kExitOk;
}

int cmd_attack(const AttackFlags& f, std::ostream& out, std::ostream& err) {
    AttackConfig cfg = base_config(f);
    cfg.method = require_method(f.method);
    cfg.eps = require_budget(f.eps, "--eps");
    cfg.steps = f.steps;
    if (!f.alpha.empty()) cfg.alpha = require_budget(f.alpha, "--alpha");
    cfg.fsa = f.fsa;
    cfg.validate();
    warn_if_degenerate(cfg, cfg.fsa, err);

    Loaded in = load_inputs(f);
    in.options.keep_adversarial = !f.save_adv.empty();
    const EvalReport report = evaluate(in.model, in.data, cfg, in.options);
    if (report.warning) err << "warning: " << *report.warning << '\n';
    std::ostringstream csv;
    write_report_csv(csv, {report}, f.record_timing);
    emit(f.out, csv.str(), out);
    if (!f.save_adv.empty()) save_adversarials(report, f.save_adv);
    return kExitOk;
}

int cmd_sweep(const AttackFlags& f, std::ostream& out, std::ostream& err) {
    SweepGrid grid;
    grid.base = base_config(f);
    for (const auto& m : split(f.methods)) grid.methods.push_back(require_method(m));
    for (const auto& e : split(f.eps_list)) grid.eps.push_back(require_budget(e, "--eps-list"));
    for (const auto& s : split(f.steps_list)) {
        const auto v = parse_real(s);
        if (!v || *v < 1 || std::floor(*v) != *v) throw ArgumentError("--steps-list: bad step count '" + s + "'");
        grid.steps.push_back(static_cast<std::size_t>(*v));
    }
    if (grid.methods.empty() || grid.eps.empty() || grid.steps.empty()) {
        throw ArgumentError("sweep needs non-empty --methods, --eps-list and --steps-list");
    }
    for (double eps : grid.eps) {
        AttackConfig probe = grid.base;
        probe.eps = eps;
        for (std::size_t s : grid.steps) {
            probe.steps = s;
            probe.validate();
        }
    }
    warn_if_degenerate(grid.base, true, err);

    Loaded in = load_inputs(f);
    const auto reports = sweep(in.model, in.data, grid, in.options);
    std::ostringstream csv;
    write_report_csv(csv, reports, f.record_timing);
    emit(f.out, csv.str(), out);
    return kExitOk;
}

int cmd_compare(const AttackFlags& f, std::ostream& out, std::ostream& err) {
    std::vector<AttackConfig> cfgs;
    const AttackConfig base = base_config(f);
    const double eps = require_budget(f.eps, "--eps");
    for (const auto& m : split(f.methods)) {
        AttackConfig cfg = base;
        cfg.method = require_method(m);
        cfg.eps = eps;
        cfg.steps = f.steps;
        cfg.validate();
        cfgs.push_back(cfg);
    }
    if (cfgs.empty()) throw ArgumentError("compare needs at least one method");
    warn_if_degenerate(base, true, err);

    Loaded in = load_inputs(f);
    const auto rows = compare_fsa(in.model, in.data, cfgs, in.options);
    std::ostringstream table;
    write_comparison_markdown(table, rows);
    emit(f.out, table.str(), out);
    if (!f.delta_csv.empty()) {
        std::ostringstream deltas;
        write_delta_csv(deltas, rows);
        emit(f.delta_csv, deltas.str(), out);
    }
    return kExitOk;
}

} // namespace

std::optional<double> parse_real_or_fraction(std::string_view text) {
    if (const auto slash = text.find('/'); slash != std::string_view::npos) {
        const auto num = parse_real(text.substr(0, slash));
        const auto den = parse_real(text.substr(slash + 1));
        if (!num || !den || *den == 0.0) return std::nullopt;
        return *num / *den;
    }
    return parse_real(text);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Frequency and spatial consistency adversarial attack toolkit"};
    app.require_subcommand(1);

    std::string arch = "cnn", train_images, train_labels, test_images, test_labels, train_out;
    TrainOptions train_options;
    std::size_t train_limit = 0;
    auto* train_cmd = app.add_subcommand("train", "Train a desk-scale victim classifier");
    train_cmd->add_option("--arch", arch, "Architecture: mlp or cnn");
    train_cmd->add_option("--images", train_images, "IDX training images")->required();
    train_cmd->add_option("--labels", train_labels, "IDX training labels")->required();
    train_cmd->add_option("--test-images", test_images, "IDX held-out images");
    train_cmd->add_option("--test-labels", test_labels, "IDX held-out labels");
    train_cmd->add_option("--epochs", train_options.epochs, "Training epochs");
    train_cmd->add_option("--lr", train_options.learning_rate, "Learning rate");
    train_cmd->add_option("--momentum", train_options.momentum, "SGD momentum");
    train_cmd->add_option("--batch-size", train_options.batch_size, "Mini-batch size");
    train_cmd->add_option("--seed", train_options.seed, "Random seed");
    train_cmd->add_option("--limit", train_limit, "Use only the first N training images (0 = all)");
    train_cmd->add_option("--out", train_out, "Output weight file")->required();

    AttackFlags attack_flags;
    auto* attack_cmd = app.add_subcommand("attack", "Attack a dataset with one configuration");
    add_data_options(attack_cmd, attack_flags);
    add_method_options(attack_cmd, attack_flags);
    attack_cmd->add_option("--method", attack_flags.method, "FGSM, IFGSM, MIFGSM, DIFGSM, TIFGSM or PGD");
    attack_cmd->add_option("--eps", attack_flags.eps, "L-infinity budget, decimal or fraction (8/255)");
    attack_cmd->add_option("--steps", attack_flags.steps, "Iterations");
    attack_cmd->add_option("--alpha", attack_flags.alpha, "Per-step size (default eps/steps)");
    attack_cmd->add_flag("--fsa", attack_flags.fsa, "Wrap the method with the frequency/spatial consistency step");
    attack_cmd->add_option("--out", attack_flags.out, "Report CSV (default stdout)");
    attack_cmd->add_option("--save-adv", attack_flags.save_adv, "Directory for 8-bit PNG adversarial images");
    attack_cmd->add_flag("--record-timing", attack_flags.record_timing, "Write wall times into the CSV");

    AttackFlags sweep_flags;
    auto* sweep_cmd = app.add_subcommand("sweep", "Factorial eps x steps x method grid, with and without FSA");
    add_data_options(sweep_cmd, sweep_flags);
    add_method_options(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--methods", sweep_flags.methods, "Comma-separated methods");
    sweep_cmd->add_option("--eps-list", sweep_flags.eps_list, "Comma-separated budgets");
    sweep_cmd->add_option("--steps-list", sweep_flags.steps_list, "Comma-separated step counts");
    sweep_cmd->add_option("--out", sweep_flags.out, "Report CSV (default stdout)");
    sweep_cmd->add_flag("--record-timing", sweep_flags.record_timing, "Write wall times into the CSV");

    AttackFlags compare_flags;
    auto* compare_cmd = app.add_subcommand("compare", "Success rate with and without FSA per method");
    add_data_options(compare_cmd, compare_flags);
    add_method_options(compare_cmd, compare_flags);
    compare_cmd->add_option("--methods", compare_flags.methods, "Comma-separated methods");
    compare_cmd->add_option("--eps", compare_flags.eps, "L-infinity budget");
    compare_cmd->add_option("--steps", compare_flags.steps, "Iterations");
    compare_cmd->add_option("--out", compare_flags.out, "Markdown table (default stdout)");
    compare_cmd->add_option("--delta-csv", compare_flags.delta_csv, "Per-method delta CSV for box plots");

    auto* selftest_cmd = app.add_subcommand("selftest", "Run the built-in oracle and property checks");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }

    try {
        if (*train_cmd) {
            return cmd_train(arch, train_images, train_labels, test_images, test_labels, train_options, train_limit,
                             train_out, out);
        }
        if (*attack_cmd) return cmd_attack(attack_flags, out, err);
        if (*sweep_cmd) return cmd_sweep(sweep_flags, out, err);
        if (*compare_cmd) return cmd_compare(compare_flags, out, err);
        if (*selftest_cmd) return run_selftest(out) ? kExitOk : kExitValidation;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ConsistencyError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitValidation;
}

} // namespace fsa

#include "fsa/evaluation.hpp"

#include "fsa/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

namespace fsa {

namespace {

std::string format(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

ImageRecord attack_one(const Classifier& model, const LabeledImage& image, std::size_t index,
                       const AttackConfig& cfg, bool keep_adversarial) {
    ImageRecord rec;
    rec.index = index;
    rec.label = image.label;
    rec.clean_pred = predict(model, image.pixels);
    rec.eligible = rec.clean_pred == image.label;
    rec.adv_pred = rec.clean_pred;
    if (!rec.eligible) return rec;

    AttackConfig per_image = cfg;
    per_image.seed = mix_seed(cfg.seed, index);
    AttackResult result = run_attack(model, image, per_image);
    rec.adv_pred = result.adv_pred;
    rec.success = result.success;
    rec.linf = result.linf;
    if (!result.mask_ones_fraction_per_step.empty()) {
        double sum = 0.0;
        for (double f : result.mask_ones_fraction_per_step) sum += f;
        rec.mask_ones_fraction = sum / static_cast<double>(result.mask_ones_fraction_per_step.size());
    }
    if (keep_adversarial) rec.adversarial = std::move(result.adversarial);
    return rec;
}

} // namespace

EvalReport evaluate(const Classifier& model, const Dataset& data, const AttackConfig& cfg,
                    const EvalOptions& options) {
    if (data.images.empty()) throw ArgumentError("evaluate: empty dataset");
    cfg.validate();
    for (const LabeledImage& image : data.images) {
        if (image.pixels.shape() != model.input_shape()) {
            throw ShapeError("dataset image shape " + to_string(image.pixels.shape()) + " does not match model input " +
                             to_string(model.input_shape()));
        }
        validate(image, model.num_classes());
    }

    const auto start = std::chrono::steady_clock::now();
    std::vector<ImageRecord> records(data.images.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            try {
                records[i] = attack_one(model, data.images[i], i, cfg, options.keep_adversarial);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, records.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    EvalReport report;
    report.model_id = options.model_id;
    report.method = cfg.method;
    report.fsa = cfg.fsa;
    report.eps = cfg.eps;
    report.steps = cfg.effective_steps();
    report.n_total = records.size();
    double mask_sum = 0.0;
    for (const ImageRecord& rec : records) {
        if (!rec.eligible) continue;
        ++report.n_eligible;
        if (rec.success) ++report.n_success;
        mask_sum += rec.mask_ones_fraction;
    }
    if (report.n_eligible == 0) {
        report.success_rate = 0.0;
        report.warning = "no image is classified correctly on clean input; success rate reported as 0";
    } else {
        report.success_rate = static_cast<double>(report.n_success) / static_cast<double>(report.n_eligible);
        report.mean_mask_ones_fraction = mask_sum / static_cast<double>(report.n_eligible);
    }
    report.records = std::move(records);
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::vector<FsaComparison> compare_fsa(const Classifier& model, const Dataset& data,
                                       const std::vector<AttackConfig>& base_cfgs, const EvalOptions& options) {
    std::vector<FsaComparison> rows;
    for (AttackConfig cfg : base_cfgs) {
        cfg.fsa = false;
        EvalReport base = evaluate(model, data, cfg, options);
        cfg.fsa = true;
        EvalReport with = evaluate(model, data, cfg, options);
        rows.push_back({std::move(base), std::move(with)});
    }
    return rows;
}

std::vector<EvalReport> sweep(const Classifier& model, const Dataset& data, const SweepGrid& grid,
                              const EvalOptions& options) {
    if (grid.methods.empty() || grid.eps.empty() || grid.steps.empty()) {
        throw ArgumentError("sweep: method, eps and steps lists must be non-empty");
    }
    std::vector<EvalReport> reports;
    for (Method method : grid.methods) {
        for (double eps : grid.eps) {
            for (std::size_t steps : grid.steps) {
                for (bool fsa : {false, true}) {
                    AttackConfig cfg = grid.base;
                    cfg.method = method;
                    cfg.eps = eps;
                    cfg.steps = steps;
                    cfg.alpha.reset();
                    cfg.fsa = fsa;
                    reports.push_back(evaluate(model, data, cfg, options));
                }
            }
        }
    }
    return reports;
}

void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports, bool with_timing) {
    out << kReportCsvHeader << '\n';
    for (const EvalReport& r : reports) {
        out << r.model_id << ',' << to_string(r.method) << ',' << (r.fsa ? "true" : "false") << ','
            << format("%.9g", r.eps) << ',' << r.steps << ',' << r.n_total << ',' << r.n_eligible << ','
            << r.n_success << ',' << format("%.6f", r.success_rate) << ','
            << format("%.6f", r.mean_mask_ones_fraction) << ','
            << format("%.3f", with_timing ? r.wall_time_s : 0.0) << '\n';
    }
}

void write_comparison_markdown(std::ostream& out, const std::vector<FsaComparison>& rows) {
    out << "| Model | Method | eps | Steps | No FSA | FSA (delta) |\n";
    out << "|---|---|---|---|---|---|\n";
    for (const FsaComparison& row : rows) {
        out << "| " << row.base.model_id << " | " << to_string(row.base.method) << " | "
            << format("%.6g", row.base.eps) << " | " << row.base.steps << " | "
            << format("%.2f", 100.0 * row.base.success_rate) << " | "
            << format("%.2f", 100.0 * row.with_fsa.success_rate) << " (" << format("%+.2f", 100.0 * row.delta())
            << ") |\n";
    }
}

void write_delta_csv(std::ostream& out, const std::vector<FsaComparison>& rows) {
    using Key = std::tuple<std::string, double, std::size_t>;
    std::vector<Method> methods;
    std::vector<Key> keys;
    std::map<std::pair<Key, Method>, double> deltas;
    for (const FsaComparison& row : rows) {
        const Key key{row.base.model_id, row.base.eps, row.base.steps};
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
        if (std::find(methods.begin(), methods.end(), row.base.method) == methods.end()) {
            methods.push_back(row.base.method);
        }
        deltas[{key, row.base.method}] = 100.0 * row.delta();
    }
    out << "model_id,eps,steps";
    for (Method m : methods) out << ",delta_" << to_string(m);
    out << '\n';
    for (const Key& key : keys) {
        out << std::get<0>(key) << ',' << format("%.9g", std::get<1>(key)) << ',' << std::get<2>(key);
        for (Method m : methods) {
            const auto it = deltas.find({key, m});
            out << ',';
            if (it != deltas.end()) out << format("%.4f", it->second);
        }
        out << '\n';
    }
}

} // namespace fsa

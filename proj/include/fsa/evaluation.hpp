#pragma once

#include "fsa/attacks.hpp"
#include "fsa/dataset.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fsa {

struct ImageRecord {
    std::size_t index = 0;
    std::size_t label = 0;
    std::size_t clean_pred = 0;
    std::size_t adv_pred = 0;
    bool eligible = false; // clean prediction correct
    bool success = false;
    double linf = 0.0;
    double mask_ones_fraction = 1.0;
    Tensor adversarial; // empty unless EvalOptions::keep_adversarial
};

struct EvalReport {
    std::string model_id;
    Method method = Method::IFGSM;
    bool fsa = false;
    double eps = 0.0;
    std::size_t steps = 0;
    std::size_t n_total = 0;
    std::size_t n_eligible = 0;
    std::size_t n_success = 0;
    double success_rate = 0.0;
    double mean_mask_ones_fraction = 1.0;
    double wall_time_s = 0.0;
    std::optional<std::string> warning;
    std::vector<ImageRecord> records;
};

struct EvalOptions {
    std::string model_id = "model";
    /// Attacks run on this many threads; results do not depend on it.
    std::size_t workers = 1;
    bool keep_adversarial = false;
};

/// Attacks every image the model classifies correctly on clean input.
/// success_rate = n_success / n_eligible, or 0 with a warning when nothing is
/// eligible. Image i is attacked with seed mix_seed(cfg.seed, i).
/// mean_mask_ones_fraction averages the per-step mask fractions of all
/// attacked images; runs without FSA report 1.
EvalReport evaluate(const Classifier& model, const Dataset& data, const AttackConfig& cfg,
                    const EvalOptions& options = {});

/// Pair of evaluations of one configuration with FSA off and on.
struct FsaComparison {
    EvalReport base;
    EvalReport with_fsa;
    double delta() const { return with_fsa.success_rate - base.success_rate; }
};

std::vector<FsaComparison> compare_fsa(const Classifier& model, const Dataset& data,
                                       const std::vector<AttackConfig>& base_cfgs, const EvalOptions& options = {});

struct SweepGrid {
    std::vector<Method> methods;
    std::vector<double> eps;
    std::vector<std::size_t> steps;
    /// Supplies every field not swept (mode, seed, method hyperparameters).
    AttackConfig base;
};

/// Full factorial grid, ordered by method, eps, steps, then FSA off/on.
std::vector<EvalReport> sweep(const Classifier& model, const Dataset& data, const SweepGrid& grid,
                              const EvalOptions& options = {});

inline constexpr const char* kReportCsvHeader =
    "model_id,method,fsa,eps,steps,n_total,n_eligible,n_success,success_rate,mean_mask_ones_fraction,wall_time_s";

/// One row per report. Wall time is written as 0 unless `with_timing`, which
/// keeps repeated runs byte-identical.
void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports, bool with_timing);

/// Markdown table in the "No FSA | FSA (delta)" layout, success rates in percent.
void write_comparison_markdown(std::ostream& out, const std::vector<FsaComparison>& rows);

/// One row per (model, eps, steps) with one delta column per method in
/// percentage points. This is the input for box plots of FSA improvement.
void write_delta_csv(std::ostream& out, const std::vector<FsaComparison>& rows);

} // namespace fsa

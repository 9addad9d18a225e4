#ifndef PANELSSM_SMC_HPP
#define PANELSSM_SMC_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "panelssm/model.hpp"

namespace panelssm {

struct UnitFilterResult {
    double loglik = 0.0;
    std::vector<double> cond_logliks;  // one per observation time
    std::vector<double> ess;           // effective sample sizes, in [1, J]
};

struct FilterResult {
    std::vector<std::string> unit_names;
    std::vector<double> unit_logliks;
    double total_loglik = 0.0;
    std::vector<std::vector<double>> cond_logliks;
    std::vector<std::vector<double>> ess;
    ParamSet params;
    std::size_t J = 0;
    std::vector<std::string> failed_units;  // units whose loglik was set to -inf

    std::size_t failure_count() const { return failed_units.size(); }
};

// J i.i.d. categorical draws proportional to weights.
std::vector<std::size_t> multinomial_resample(std::span<const double> weights, RngStream& rng);

// Stratified low-variance alternative (one uniform, J evenly spaced probes).
// Not used by the filtering pipeline, which keeps the categorical draw.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, RngStream& rng);

// (sum w)^2 / sum w^2; J for equal weights, 1 when one particle holds all mass.
double effective_sample_size(std::span<const double> weights);

// Bootstrap filter for one unit: propagate, weight, resample at every step.
// Throws FilteringFailure carrying (unit, n) when every weight vanishes.
// Stream layout: key.child(0) covers rinit, key.child(n) covers step n with
// child(0) for resampling and child(1+j) for particle j.
UnitFilterResult pfilter_unit(const UnitModel& m, const NamedValues& params, std::size_t J,
                              const RngKey& key);

// Filters every unit under its own stream key.child(u); a unit that fails
// contributes -inf and is listed in failed_units.
FilterResult pfilter_panel(const PanelModel& p, std::size_t J, const RngKey& key,
                           std::size_t workers = 1);

// log(mean(exp(v))) with max-shift.
double logmeanexp(std::span<const double> v);

struct MeanSe {
    double value = 0.0;
    double se = 0.0;
};

// Delete-one jackknife standard error alongside the estimate.
MeanSe logmeanexp_se(std::span<const double> v);

// Replicate-averaged panel estimators over a U x I matrix of unit logliks:
// lambda1 pools whole-panel replicates, lambda2 averages each unit first.
double panel_lambda1(const Matrix& unit_by_replicate);
double panel_logmeanexp(const Matrix& unit_by_replicate);
MeanSe panel_lambda1_se(const Matrix& unit_by_replicate);
MeanSe panel_logmeanexp_se(const Matrix& unit_by_replicate);

// One row per (unit, time) plus per-unit and panel summary rows.
Table filter_result_table(const FilterResult& r);

}  // namespace panelssm

#endif

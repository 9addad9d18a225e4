#ifndef PANELSSM_PROFILE_MCAP_HPP
#define PANELSSM_PROFILE_MCAP_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "panelssm/mif.hpp"
#include "panelssm/model.hpp"

namespace panelssm {

struct LoessResult {
    std::vector<double> fitted;
    // Squared norm of the equivalent-kernel weights at each eval point;
    // multiply by the residual variance for a pointwise fitted variance.
    std::vector<double> variance_factor;
};

// Local quadratic regression with tricube weights over the span-nearest
// neighbors; degenerate neighborhoods fall back to local linear, then to a
// weighted mean.
LoessResult loess_smooth(std::span<const double> x, std::span<const double> y, double span,
                         std::span<const double> eval_points);

struct McapResult {
    std::vector<double> grid;      // evaluation grid over the observed range
    std::vector<double> smoothed;  // fitted profile on the grid
    double mle = 0.0;
    double delta = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double se_stat = 0.0;
    double se_mc = 0.0;
    double se_total = 0.0;
    bool concave = true;  // false -> interval widened to the observed range
    double level = 0.95;
    double span = 0.75;
};

// Monte Carlo adjusted profile interval: loess-smooth the profile, take the
// grid argmax, fit a tricube-weighted quadratic near it for curvature and
// its Monte Carlo error, inflate the chi-square cutoff by se_total^2 /
// se_stat^2, and cut the smoothed curve.
McapResult mcap(std::span<const double> loglik, std::span<const double> parameter,
                double level = 0.95, double span = 0.75, std::size_t grid_points = 1000);

struct ProfileSettings {
    MifSettings search;          // focal rw_sd is forced to zero
    std::size_t block_reps = 0;  // 0 skips block refinement
    std::size_t eval_reps = 10;
    std::size_t eval_J = 2500;
    std::size_t workers = 1;
};

struct ProfileResult {
    std::vector<std::string> param_names;  // flattened layout
    std::size_t focal_column = 0;
    Matrix params;  // one row per kept profile point
    std::vector<double> loglik;
    std::vector<double> loglik_se;
    std::size_t dropped = 0;  // points whose every evaluation failed
};

// For each design row: frozen-focal mif2 search, optional block refinement,
// then unperturbed replicate evaluations combined by logmeanexp. Keeps the
// best row per focal value, ordered by focal value.
ProfileResult run_profile(const PanelModel& p, const std::string& focal,
                          const DesignMatrix& design, const ProfileSettings& ps,
                          const RngKey& key);

Table profile_table(const ProfileResult& r);
ProfileResult profile_from_table(const Table& t, const std::string& focal);

Table mcap_summary_table(const McapResult& r);
Table mcap_curve_table(const McapResult& r);

}  // namespace panelssm

#endif

#include "panelssm/profile_mcap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "panelssm/errors.hpp"
#include "panelssm/parallel.hpp"
#include "panelssm/smc.hpp"
#include "panelssm/stats.hpp"

namespace panelssm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double cube(double v) { return v * v * v; }

// Gauss-Jordan inverse for n <= 3; false when singular.
bool invert_small(const double* m, std::size_t n, double* inv) {
    double a[9], b[9];
    std::copy(m, m + n * n, a);
    std::fill(b, b + n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) b[i * n + i] = 1.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) scale = std::max(scale, std::abs(a[i]));
    if (scale == 0.0) return false;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (std::abs(a[pivot * n + col]) < 1e-12 * scale) return false;
        if (pivot != col)
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a[pivot * n + j], a[col * n + j]);
                std::swap(b[pivot * n + j], b[col * n + j]);
            }
        const double d = a[col * n + col];
        for (std::size_t j = 0; j < n; ++j) {
            a[col * n + j] /= d;
            b[col * n + j] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a[r * n + j] -= f * a[col * n + j];
                b[r * n + j] -= f * b[col * n + j];
            }
        }
    }
    std::copy(b, b + n * n, inv);
    return true;
}

// Weighted polynomial normal equations around x0 with basis (1, dx, dx^2).
void accumulate_normal(std::span<const double> x, std::span<const double> y,
                       std::span<const double> w, double x0, std::size_t rank, double* m,
                       double* v) {
    std::fill(m, m + rank * rank, 0.0);
    std::fill(v, v + rank, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (w[i] == 0.0) continue;
        double basis[3] = {1.0, x[i] - x0, (x[i] - x0) * (x[i] - x0)};
        for (std::size_t r = 0; r < rank; ++r) {
            for (std::size_t c = 0; c < rank; ++c) m[r * rank + c] += w[i] * basis[r] * basis[c];
            v[r] += w[i] * basis[r] * y[i];
        }
    }
}

}  // namespace

LoessResult loess_smooth(std::span<const double> x, std::span<const double> y, double span,
                         std::span<const double> eval_points) {
    const std::size_t n = x.size();
    if (y.size() != n) throw ArgumentError("loess_smooth: x and y lengths differ");
    if (n < 5) throw SmoothingError("loess_smooth needs at least 5 points, got " +
                                    std::to_string(n));
    if (!(span > 0) || !(span <= 1))
        throw ArgumentError("loess span must lie in (0, 1], got " + format_double(span));
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    if (*xmin == *xmax) throw SmoothingError("loess_smooth: all x values are equal");

    const std::size_t q =
        std::min(n, std::max<std::size_t>(3, static_cast<std::size_t>(span * n)));

    LoessResult out;
    out.fitted.resize(eval_points.size());
    out.variance_factor.resize(eval_points.size());
    std::vector<double> dist(n), w(n);

    for (std::size_t e = 0; e < eval_points.size(); ++e) {
        const double x0 = eval_points[e];
        for (std::size_t i = 0; i < n; ++i) dist[i] = std::abs(x[i] - x0);
        std::vector<double> sorted(dist);
        std::nth_element(sorted.begin(), sorted.begin() + q - 1, sorted.end());
        const double dmax = sorted[q - 1];

        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (dist[i] > dmax)
                w[i] = 0.0;
            else if (dmax == 0.0)
                w[i] = 1.0;
            else
                w[i] = cube(1.0 - cube(dist[i] / dmax));
            wsum += w[i];
        }
        if (wsum == 0.0) {
            for (std::size_t i = 0; i < n; ++i) w[i] = dist[i] <= dmax ? 1.0 : 0.0;
        }

        double m[9], v[3], inv[9], coef[3];
        double fitted = kNan, var_factor = kNan;
        for (std::size_t rank = 3; rank >= 1; --rank) {
            accumulate_normal(x, y, w, x0, rank, m, v);
            if (!invert_small(m, rank, inv)) continue;
            for (std::size_t r = 0; r < rank; ++r) {
                coef[r] = 0.0;
                for (std::size_t c = 0; c < rank; ++c) coef[r] += inv[r * rank + c] * v[c];
            }
            fitted = coef[0];
            // Equivalent-kernel row: l_i = w_i * basis_i . inv(.,0)
            var_factor = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (w[i] == 0.0) continue;
                double basis[3] = {1.0, x[i] - x0, (x[i] - x0) * (x[i] - x0)};
                double l = 0.0;
                for (std::size_t r = 0; r < rank; ++r) l += inv[0 * rank + r] * basis[r];
                l *= w[i];
                var_factor += l * l;
            }
            break;
        }
        if (std::isnan(fitted)) throw SmoothingError("loess_smooth: degenerate neighborhood");
        out.fitted[e] = fitted;
        out.variance_factor[e] = var_factor;
    }
    return out;
}

McapResult mcap(std::span<const double> loglik, std::span<const double> parameter, double level,
                double span, std::size_t grid_points) {
    const std::size_t n = loglik.size();
    if (parameter.size() != n) throw ArgumentError("mcap: loglik and parameter lengths differ");
    if (!(level > 0) || !(level < 1))
        throw ArgumentError("mcap level must lie in (0, 1), got " + format_double(level));
    if (grid_points < 2) throw ArgumentError("mcap needs at least 2 grid points");

    // Center by the maximum so a common vertical shift cannot change the
    // result, then restore the offset for the reported curve.
    const double ymax = *std::max_element(loglik.begin(), loglik.end());
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = loglik[i] - ymax;

    McapResult out;
    out.level = level;
    out.span = span;
    const auto [pmin_it, pmax_it] = std::minmax_element(parameter.begin(), parameter.end());
    const double pmin = *pmin_it, pmax = *pmax_it;
    out.grid.resize(grid_points);
    for (std::size_t g = 0; g < grid_points; ++g)
        out.grid[g] = pmin + (pmax - pmin) * static_cast<double>(g) /
                                 static_cast<double>(grid_points - 1);

    const LoessResult smooth = loess_smooth(parameter, y, span, out.grid);
    const auto arg = std::max_element(smooth.fitted.begin(), smooth.fitted.end());
    const std::size_t gmax = static_cast<std::size_t>(arg - smooth.fitted.begin());
    const double smax = *arg;
    out.mle = out.grid[gmax];

    // Tricube weights over the span-fraction of points nearest the smoothed
    // argmax, then a weighted quadratic for curvature and its sampling error.
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = std::abs(parameter[i] - out.mle);
    std::vector<double> sorted(dist);
    std::sort(sorted.begin(), sorted.end());
    std::size_t k = static_cast<std::size_t>(span * static_cast<double>(n));
    k = std::min(n, std::max(std::min(n, static_cast<std::size_t>(5)), k));
    const double threshold = sorted[k - 1];
    std::vector<double> w(n, 0.0);
    double maxdist = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (dist[i] < threshold) maxdist = std::max(maxdist, dist[i]);
    std::size_t n_used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (dist[i] >= threshold) continue;
        w[i] = maxdist == 0.0 ? 1.0 : cube(1.0 - cube(dist[i] / maxdist));
        if (w[i] > 0) ++n_used;
    }
    if (n_used < 3) {
        std::fill(w.begin(), w.end(), 0.0);
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
        n_used = std::min<std::size_t>(n, 5);
        for (std::size_t i = 0; i < n_used; ++i) w[order[i]] = 1.0;
    }

    // Basis (1, dx, dx^2) around the argmax; curvature a = -coef[2], slope
    // b = coef[1] in the parameterization y = const + b dx - a dx^2.
    double m[9], v[3], inv[9], coef[3];
    accumulate_normal(parameter, y, w, out.mle, 3, m, v);
    if (!invert_small(m, 3, inv))
        throw SmoothingError("mcap: quadratic fit near the maximum is degenerate");
    for (std::size_t r = 0; r < 3; ++r) {
        coef[r] = 0.0;
        for (std::size_t c = 0; c < 3; ++c) coef[r] += inv[r * 3 + c] * v[c];
    }
    const double a = -coef[2];
    const double b = coef[1];

    double rss = 0.0;
    std::size_t nw = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (w[i] == 0.0) continue;
        const double dx = parameter[i] - out.mle;
        const double e = y[i] - (coef[0] + coef[1] * dx + coef[2] * dx * dx);
        rss += w[i] * e * e;
        ++nw;
    }
    const double sigma2 = nw > 3 ? rss / static_cast<double>(nw - 3) : 0.0;
    const double var_b = sigma2 * inv[1 * 3 + 1];
    const double var_a = sigma2 * inv[2 * 3 + 2];
    const double cov_ab = -sigma2 * inv[1 * 3 + 2];

    out.smoothed.resize(grid_points);
    for (std::size_t g = 0; g < grid_points; ++g) out.smoothed[g] = smooth.fitted[g] + ymax;

    if (!(a > 0)) {
        out.concave = false;
        out.delta = kInf;
        out.se_stat = out.se_mc = out.se_total = kNan;
        out.ci_lower = pmin;
        out.ci_upper = pmax;
        return out;
    }

    const double se_stat2 = 1.0 / (2.0 * a);
    const double se_mc2 =
        (var_b - (2.0 * b / a) * cov_ab + (b * b / (a * a)) * var_a) / (4.0 * a * a);
    const double se_total2 = se_stat2 + se_mc2;
    out.se_stat = std::sqrt(se_stat2);
    out.se_mc = std::sqrt(std::max(0.0, se_mc2));
    out.se_total = std::sqrt(se_total2);
    out.delta = 0.5 * chisq1_quantile(level) * se_total2 / se_stat2;

    // Connected cut around the argmax, boundary crossings interpolated.
    const double cut = smax - out.delta;
    std::size_t lo = gmax, hi = gmax;
    while (lo > 0 && smooth.fitted[lo - 1] >= cut) --lo;
    while (hi + 1 < grid_points && smooth.fitted[hi + 1] >= cut) ++hi;
    out.ci_lower = out.grid[lo];
    if (lo > 0) {
        const double f0 = smooth.fitted[lo - 1], f1 = smooth.fitted[lo];
        if (f1 != f0)
            out.ci_lower = out.grid[lo - 1] + (out.grid[lo] - out.grid[lo - 1]) * (cut - f0) /
                                                  (f1 - f0);
    }
    out.ci_upper = out.grid[hi];
    if (hi + 1 < grid_points) {
        const double f0 = smooth.fitted[hi], f1 = smooth.fitted[hi + 1];
        if (f1 != f0)
            out.ci_upper = out.grid[hi] + (out.grid[hi + 1] - out.grid[hi]) * (cut - f0) /
                                              (f1 - f0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Profile orchestration
// ---------------------------------------------------------------------------

namespace {

std::size_t focal_flat_index(const ParamLayout& layout, const std::string& focal) {
    const std::vector<std::string> names = layout.flat_names();
    const auto it = std::find(names.begin(), names.end(), focal);
    if (it == names.end())
        throw UnknownParameterError("focal parameter '" + focal +
                                    "' is not in the flattened layout");
    return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

ProfileResult run_profile(const PanelModel& p, const std::string& focal,
                          const DesignMatrix& design, const ProfileSettings& ps,
                          const RngKey& key) {
    p.validate();
    if (design.row_count() == 0) throw ArgumentError("run_profile: empty design");
    if (ps.eval_reps < 1) throw ArgumentError("run_profile needs eval_reps >= 1");
    const ParamLayout layout = p.params.layout();

    ProfileResult out;
    out.param_names = layout.flat_names();
    out.focal_column = focal_flat_index(layout, focal);

    MifSettings search = ps.search;
    search.rw_sd = search.rw_sd.without(parse_param_name(focal).base);

    struct Point {
        std::vector<double> flat;
        double ll = kNegInf;
        double se = 0.0;
        bool failed = false;
    };
    const auto points = parallel_map<Point>(design.row_count(), ps.workers, [&](std::size_t i) {
        Point pt;
        const RngKey task_key = key.child(i);
        try {
            const ParamSet start = apply_values(p.params, design.row(i));
            MifResult r = mif2_panel(p, start, search, task_key.child(0));
            if (ps.block_reps >= 1 && p.params.specific_count() > 0)
                r = block_refine(r, p, ps.block_reps, task_key.child(1));
            PanelModel pe = p;
            pe.params = r.estimate;
            const RngKey eval_key = task_key.child(2);
            std::vector<double> totals(ps.eval_reps);
            for (std::size_t rep = 0; rep < ps.eval_reps; ++rep)
                totals[rep] = pfilter_panel(pe, ps.eval_J, eval_key.child(rep)).total_loglik;
            if (*std::max_element(totals.begin(), totals.end()) == kNegInf) {
                pt.failed = true;
                return pt;
            }
            if (ps.eval_reps >= 2) {
                const MeanSe ms = logmeanexp_se(totals);
                pt.ll = ms.value;
                pt.se = ms.se;
            } else {
                pt.ll = totals[0];
            }
            pt.flat = r.estimate.flat_values();
        } catch (const FilteringFailure&) {
            pt.failed = true;
        }
        return pt;
    });

    std::map<double, std::size_t> best;  // focal value -> point index
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].failed) {
            ++out.dropped;
            continue;
        }
        const double fv = points[i].flat[out.focal_column];
        const auto it = best.find(fv);
        if (it == best.end() || points[i].ll > points[it->second].ll) best[fv] = i;
    }

    out.params = Matrix(best.size(), out.param_names.size());
    std::size_t r = 0;
    for (const auto& [fv, i] : best) {
        for (std::size_t c = 0; c < out.param_names.size(); ++c)
            out.params(r, c) = points[i].flat[c];
        out.loglik.push_back(points[i].ll);
        out.loglik_se.push_back(points[i].se);
        ++r;
    }
    return out;
}

Table profile_table(const ProfileResult& r) {
    Table t;
    t.columns = r.param_names;
    t.columns.push_back("loglik");
    t.columns.push_back("loglik_se");
    for (std::size_t i = 0; i < r.loglik.size(); ++i) {
        std::vector<std::string> row;
        row.reserve(t.columns.size());
        for (std::size_t c = 0; c < r.param_names.size(); ++c)
            row.push_back(format_double(r.params(i, c)));
        row.push_back(format_double(r.loglik[i]));
        row.push_back(format_double(r.loglik_se[i]));
        t.add_row(std::move(row));
    }
    return t;
}

ProfileResult profile_from_table(const Table& t, const std::string& focal) {
    ProfileResult r;
    const auto ll_col = t.col_index("loglik");
    const auto se_col = t.col_index("loglik_se");
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        if (c != ll_col && c != se_col) r.param_names.push_back(t.columns[c]);
    const auto it = std::find(r.param_names.begin(), r.param_names.end(), focal);
    if (it == r.param_names.end())
        throw UnknownParameterError("focal parameter '" + focal + "' is not a profile column");
    r.focal_column = static_cast<std::size_t>(it - r.param_names.begin());
    r.params = Matrix(t.rows.size(), r.param_names.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        std::size_t c_out = 0;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            if (c == ll_col || c == se_col) continue;
            r.params(i, c_out++) = parse_double(t.rows[i][c]);
        }
        r.loglik.push_back(parse_double(t.rows[i][ll_col]));
        r.loglik_se.push_back(parse_double(t.rows[i][se_col]));
    }
    return r;
}

Table mcap_summary_table(const McapResult& r) {
    Table t;
    t.columns = {"mle",   "ci_lower", "ci_upper", "delta", "se_stat",
                 "se_mc", "se_total", "level",    "span",  "concave"};
    t.add_row({format_double(r.mle), format_double(r.ci_lower), format_double(r.ci_upper),
               format_double(r.delta), format_double(r.se_stat), format_double(r.se_mc),
               format_double(r.se_total), format_double(r.level), format_double(r.span),
               r.concave ? "1" : "0"});
    return t;
}

Table mcap_curve_table(const McapResult& r) {
    Table t;
    t.columns = {"parameter", "smoothed"};
    for (std::size_t g = 0; g < r.grid.size(); ++g)
        t.add_row({format_double(r.grid[g]), format_double(r.smoothed[g])});
    return t;
}

}  // namespace panelssm

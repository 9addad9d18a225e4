#include "helpers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace testutil {

double simpson(const std::function<double(double)>& f, double a, double b,
               std::size_t intervals) {
    if (intervals < 2) intervals = 2;
    if (intervals % 2 != 0) ++intervals;
    const double h = (b - a) / static_cast<double>(intervals);
    double acc = f(a) + f(b);
    for (std::size_t i = 1; i < intervals; ++i) {
        const double x = a + h * static_cast<double>(i);
        acc += f(x) * (i % 2 == 0 ? 2.0 : 4.0);
    }
    return acc * h / 3.0;
}

namespace {

NelderMeadResult nm_once(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<double>& start, double step,
                         std::size_t max_iter, double tol) {
    const std::size_t d = start.size();
    std::vector<std::vector<double>> simplex(d + 1, start);
    for (std::size_t i = 0; i < d; ++i) simplex[i + 1][i] += step;
    std::vector<double> fv(d + 1);
    NelderMeadResult out;
    for (std::size_t i = 0; i <= d; ++i) {
        fv[i] = f(simplex[i]);
        ++out.evals;
    }
    std::vector<std::size_t> order(d + 1);
    for (std::size_t it = 0; it < max_iter; ++it) {
        for (std::size_t i = 0; i <= d; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order[0], worst = order[d], second = order[d - 1];
        if (std::abs(fv[worst] - fv[best]) <=
            tol * (std::abs(fv[best]) + std::abs(fv[worst]) + 1e-30)) {
            break;
        }
        std::vector<double> centroid(d, 0.0);
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < d; ++k) centroid[k] += simplex[i][k];
        }
        for (std::size_t k = 0; k < d; ++k) centroid[k] /= static_cast<double>(d);
        auto blend = [&](double t) {
            std::vector<double> x(d);
            for (std::size_t k = 0; k < d; ++k)
                x[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
            return x;
        };
        std::vector<double> refl = blend(-1.0);
        double frefl = f(refl);
        ++out.evals;
        if (frefl < fv[order[0]]) {
            std::vector<double> exp_pt = blend(-2.0);
            double fexp = f(exp_pt);
            ++out.evals;
            if (fexp < frefl) {
                simplex[worst] = std::move(exp_pt);
                fv[worst] = fexp;
            } else {
                simplex[worst] = std::move(refl);
                fv[worst] = frefl;
            }
            continue;
        }
        if (frefl < fv[second]) {
            simplex[worst] = std::move(refl);
            fv[worst] = frefl;
            continue;
        }
        std::vector<double> contr = blend(frefl < fv[worst] ? -0.5 : 0.5);
        double fcontr = f(contr);
        ++out.evals;
        if (fcontr < std::min(frefl, fv[worst])) {
            simplex[worst] = std::move(contr);
            fv[worst] = fcontr;
            continue;
        }
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < d; ++k)
                simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
            fv[i] = f(simplex[i]);
            ++out.evals;
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= d; ++i)
        if (fv[i] < fv[best]) best = i;
    out.point = simplex[best];
    out.value = fv[best];
    return out;
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, double step, std::size_t max_iter,
                             double tol) {
    NelderMeadResult r1 = nm_once(f, start, step, max_iter, tol);
    NelderMeadResult r2 = nm_once(f, r1.point, step * 0.1, max_iter, tol);
    r2.evals += r1.evals;
    if (r1.value < r2.value) {
        r1.evals = r2.evals;
        return r1;
    }
    return r2;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string temp_dir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    const unsigned id = counter.fetch_add(1);
    auto dir = std::filesystem::temp_directory_path() /
               ("panelssm_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(id));
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace testutil

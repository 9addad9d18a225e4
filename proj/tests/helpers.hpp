#ifndef PANELSSM_TESTS_HELPERS_HPP
#define PANELSSM_TESTS_HELPERS_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace testutil {

// Composite Simpson rule on [a, b]; intervals is rounded up to even.
double simpson(const std::function<double(double)>& f, double a, double b,
               std::size_t intervals);

struct NelderMeadResult {
    std::vector<double> point;
    double value = 0.0;
    std::size_t evals = 0;
};

// Derivative-free simplex minimizer with one restart from the incumbent.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, double step, std::size_t max_iter,
                             double tol);

std::string slurp(const std::string& path);

// Unique fresh directory under the system temp root.
std::string temp_dir(const std::string& tag);

}  // namespace testutil

#endif

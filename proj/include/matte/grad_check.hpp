#ifndef MATTE_GRAD_CHECK_HPP
#define MATTE_GRAD_CHECK_HPP

// Reverse-mode gradients vs central finite differences, always in double.

#include <functional>
#include <string>
#include <vector>

#include "matte/tensor.hpp"

namespace matte {

struct GradCheckReport {
    std::string op_name;
    double max_rel_error = 0.0;
    std::vector<double> per_input_errors;
    bool passed = false;
};

// Closure maps the input list to a scalar tensor. Inputs are mutated in
// place during the finite-difference sweep and restored afterwards.
using ScalarClosure = std::function<Tensor<double>(std::vector<Tensor<double>>&)>;

inline GradCheckReport grad_check(const std::string& op_name, const ScalarClosure& fn,
                                  std::vector<Tensor<double>>& inputs, double epsilon = 1e-5,
                                  double tolerance = 1e-4) {
    GradCheckReport report;
    report.op_name = op_name;
    for (auto& t : inputs) t.zero_grad();
    Tensor<double> loss = fn(inputs);
    backward(loss);
    report.per_input_errors.assign(inputs.size(), 0.0);
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& t = inputs[ti];
        std::vector<double> analytic =
            t.has_grad() ? t.grad() : std::vector<double>(t.values().size(), 0.0);
        for (std::size_t i = 0; i < t.mutable_values().size(); ++i) {
            double orig = t.mutable_values()[i];
            double fp, fm;
            {
                NoGradGuard ng;
                t.mutable_values()[i] = orig + epsilon;
                fp = fn(inputs).item();
                t.mutable_values()[i] = orig - epsilon;
                fm = fn(inputs).item();
                t.mutable_values()[i] = orig;
            }
            double numeric = (fp - fm) / (2.0 * epsilon);
            double a = analytic[i];
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            double rel = std::abs(a - numeric) / denom;
            report.per_input_errors[ti] = std::max(report.per_input_errors[ti], rel);
        }
        report.max_rel_error = std::max(report.max_rel_error, report.per_input_errors[ti]);
    }
    report.passed = report.max_rel_error < tolerance;
    return report;
}

}  // namespace matte

#endif  // MATTE_GRAD_CHECK_HPP

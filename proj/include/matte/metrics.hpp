#ifndef MATTE_METRICS_HPP
#define MATTE_METRICS_HPP

// Matting evaluation metrics: SAD, SAD-T, gradient difference and
// connectivity error. Grad uses first-derivative-of-Gaussian filtering with
// sigma 1.4 and Conn the perceptual-connectivity definition with threshold
// step 0.1; both are the common benchmark conventions. Reported values are
// raw sums; the usual tables divide by 1000.

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace matte {

struct MetricValues {
    double sad = 0.0;    // raw sum of absolute differences
    double sad_t = 0.0;  // restricted to the transition (uncertain) mask
    double grad = 0.0;
    double conn = 0.0;
};

double metric_sad(const std::vector<float>& pred, const std::vector<float>& gt);

// mask: nonzero marks the transition area.
double metric_sad_t(const std::vector<float>& pred, const std::vector<float>& gt,
                    const std::vector<std::uint8_t>& mask);

double metric_grad(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w,
                   double sigma = 1.4);

double metric_conn(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w,
                   double step = 0.1);

}  // namespace matte

#endif  // MATTE_METRICS_HPP

#ifndef MATTE_FLOPS_HPP
#define MATTE_FLOPS_HPP

// Analytic FLOP accounting: nominal multiply-adds per layer, 2 FLOPs per
// MAC. The refinement cost is exactly linear in the region count.

#include <cstdint>

#include "matte/config.hpp"

namespace matte {

struct FlopReport {
    std::int64_t coarse_flops = 0;
    std::int64_t refine_flops = 0;
    std::int64_t total = 0;
};

FlopReport count_flops(const PipelineConfig& cfg, int height, int width,
                       std::int64_t n_regions);

}  // namespace matte

#endif  // MATTE_FLOPS_HPP

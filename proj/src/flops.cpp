#include "matte/flops.hpp"

namespace matte {

FlopReport count_flops(const PipelineConfig& cfg, int height, int width,
                       std::int64_t n_regions) {
    cfg.validate();
    FlopReport r;
    r.coarse_flops = 2 * LowresNet<float>::analytic_macs(cfg.backbone, height, width);
    r.refine_flops = 2 * RefineNet<float>::analytic_macs_per_region(cfg.refine) * n_regions;
    r.total = r.coarse_flops + r.refine_flops;
    return r;
}

}  // namespace matte

#ifndef MATTE_PIPELINE_HPP
#define MATTE_PIPELINE_HPP

// End-to-end orchestration: model assembly, Adam optimizer, training loop
// over synthetic (or on-disk) composites, inference with KD-tree region
// refinement, evaluation, and checkpoint conversion.

#include <iosfwd>
#include <string>
#include <vector>

#include "matte/checkpoint.hpp"
#include "matte/config.hpp"
#include "matte/metrics.hpp"
#include "matte/synth.hpp"

namespace matte {

struct Model {
    PipelineConfig cfg;
    LowresNet<float> lowres;
    RefineNet<float> refine;
    ParamMap<float> params;  // collection order defines checkpoint order

    explicit Model(const PipelineConfig& cfg);
};

class Adam {
public:
    Adam() = default;
    explicit Adam(double lr) : lr_(lr) {}
    void set_lr(double lr) { lr_ = lr; }
    void step(ParamMap<float>& params);
    void zero_grad(ParamMap<float>& params);
    void export_state(Checkpoint& ck, const ParamMap<float>& params) const;
    void import_state(const Checkpoint& ck, const ParamMap<float>& params);
    std::int64_t steps_taken() const { return t_; }

private:
    double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::int64_t t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

Checkpoint model_to_checkpoint(const Model& model);
Model model_from_checkpoint(const Checkpoint& ck);

struct StepLosses {
    Tensor<float> total;
    std::vector<std::pair<std::string, float>> components;
    int n_regions = 0;
};

// One training sample's full loss graph (coarse heads at 1/8, 1/16, 1/32
// plus refinement alpha/Laplacian/composition at full resolution).
StepLosses forward_losses(Model& model, const CompositeSample& sample);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> total_trace;  // per-step total loss
    std::string trace_text;           // deterministic %.17g log lines
};

TrainResult train(const PipelineConfig& cfg, const std::string& out_path = "",
                  std::ostream* log = nullptr);

struct RegionDebug {
    std::vector<RegionCoord> coords;
    std::vector<std::vector<int>> knn;
    std::vector<std::vector<int>> bias_slots;
    std::string to_json() const;
};

struct InferResult {
    int h = 0, w = 0;                 // original dims
    std::vector<float> alpha;         // refined, h*w
    std::vector<float> alpha_coarse;  // upsampled coarse alpha, h*w
    int trimap_h = 0, trimap_w = 0;
    std::vector<float> trimap;        // coarse trimap probs, trimap_h*trimap_w*3
    RegionDebug debug;
};

// rgb: h*w*3 in [0,1]. Pads to dims divisible by 32 (and at least 224),
// runs the full pipeline with KD-tree KNN, un-pads the result.
InferResult infer(const Model& model, const std::vector<float>& rgb, int h, int w,
                  bool use_refine = true);

struct ImageMetrics {
    std::string name;
    MetricValues values;
};

struct EvalReport {
    std::vector<ImageMetrics> images;
    MetricValues mean;
    std::string to_json() const;
    std::string to_text() const;
};

// Pairs files by name between the two directories; every image must have a
// ground-truth counterpart.
EvalReport evaluate(const Model& model, const std::string& image_dir,
                    const std::string& gt_dir);

// Quick oracle suite (autodiff, KNN equivalence, bias table, round trips);
// returns true when everything passes, logging one line per check.
bool selftest(std::ostream& log);

// MATTE_THREADS cap (the pipeline itself is sequential; the cap bounds any
// optional internal parallelism).
int thread_cap();

}  // namespace matte

#endif  // MATTE_PIPELINE_HPP

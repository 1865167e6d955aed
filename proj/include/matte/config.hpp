#ifndef MATTE_CONFIG_HPP
#define MATTE_CONFIG_HPP

#include <string>

#include "matte/losses.hpp"
#include "matte/lowres.hpp"
#include "matte/refine.hpp"

namespace matte {

struct TrainConfig {
    int steps = 300;
    int batch = 1;
    double learning_rate = 3e-4;
    double lr_final_scale = 1.0;  // cosine decay to lr * scale; 1 keeps lr constant
    std::uint64_t seed = 1;
    int resize = 896;
    bool augment = false;
    int max_regions = 4096;
    int checkpoint_every = 0;  // 0 disables periodic checkpoints

    void validate() const {
        if (steps < 0 || batch < 1) throw std::invalid_argument("train: bad steps/batch");
        if (learning_rate <= 0) throw std::invalid_argument("train: learning_rate must be > 0");
        if (lr_final_scale <= 0 || lr_final_scale > 1)
            throw std::invalid_argument("train: lr_final_scale must be in (0,1]");
        if (resize < 224)
            throw std::invalid_argument("train: resize must be >= 224, got " +
                                        std::to_string(resize));
        if (resize % 32 != 0)
            throw std::invalid_argument("train: resize must be divisible by 32");
        if (max_regions < 0) throw std::invalid_argument("train: max_regions must be >= 0");
    }
};

struct DataConfig {
    int synthetic_count = 4;
    int synthetic_size = 224;
    std::string image_dir;  // when set, overrides the synthetic generator
    std::string alpha_dir;
};

struct PipelineConfig {
    BackboneConfig backbone;
    RefineConfig refine;
    LossConfig loss;
    TrainConfig train;
    DataConfig data;
    double norm_mean = 0.5;
    double norm_std = 0.5;

    void validate() const {
        backbone.validate();
        refine.validate();
        loss.validate();
        train.validate();
        if (norm_std <= 0) throw std::invalid_argument("config: norm_std must be > 0");
    }
};

// JSON round trip; to_json emits every field, from_json accepts partial
// objects (absent fields keep defaults).
std::string config_to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const std::string& json_text);
PipelineConfig load_config(const std::string& path);

}  // namespace matte

#endif  // MATTE_CONFIG_HPP

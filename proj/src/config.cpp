#include "matte/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace matte {

using nlohmann::json;

std::string config_to_json(const PipelineConfig& cfg) {
    json j;
    j["backbone"] = {{"patch_size", cfg.backbone.patch_size},
                     {"embed_dim", cfg.backbone.embed_dim},
                     {"depths", cfg.backbone.depths},
                     {"num_heads", cfg.backbone.num_heads},
                     {"window_size", cfg.backbone.window_size},
                     {"downsample_pre", cfg.backbone.downsample_pre}};
    j["refine"] = {{"feat_dim", cfg.refine.feat_dim},
                   {"num_heads", cfg.refine.num_heads},
                   {"k", cfg.refine.k},
                   {"s", cfg.refine.s}};
    j["loss"] = {{"epsilon", cfg.loss.epsilon},
                 {"pyramid_levels", cfg.loss.pyramid_levels},
                 {"dilate_radius", cfg.loss.dilate_radius},
                 {"erode_radius", cfg.loss.erode_radius}};
    j["train"] = {{"steps", cfg.train.steps},
                  {"batch", cfg.train.batch},
                  {"learning_rate", cfg.train.learning_rate},
                  {"lr_final_scale", cfg.train.lr_final_scale},
                  {"seed", cfg.train.seed},
                  {"resize", cfg.train.resize},
                  {"augment", cfg.train.augment},
                  {"max_regions", cfg.train.max_regions},
                  {"checkpoint_every", cfg.train.checkpoint_every}};
    j["data"] = {{"synthetic_count", cfg.data.synthetic_count},
                 {"synthetic_size", cfg.data.synthetic_size},
                 {"image_dir", cfg.data.image_dir},
                 {"alpha_dir", cfg.data.alpha_dir}};
    j["norm_mean"] = cfg.norm_mean;
    j["norm_std"] = cfg.norm_std;
    return j.dump(2);
}

namespace {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

PipelineConfig config_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    PipelineConfig cfg;
    if (j.contains("backbone")) {
        const auto& b = j.at("backbone");
        get_if(b, "patch_size", cfg.backbone.patch_size);
        get_if(b, "embed_dim", cfg.backbone.embed_dim);
        get_if(b, "depths", cfg.backbone.depths);
        get_if(b, "num_heads", cfg.backbone.num_heads);
        get_if(b, "window_size", cfg.backbone.window_size);
        get_if(b, "downsample_pre", cfg.backbone.downsample_pre);
    }
    if (j.contains("refine")) {
        const auto& r = j.at("refine");
        get_if(r, "feat_dim", cfg.refine.feat_dim);
        get_if(r, "num_heads", cfg.refine.num_heads);
        get_if(r, "k", cfg.refine.k);
        get_if(r, "s", cfg.refine.s);
    }
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        get_if(l, "epsilon", cfg.loss.epsilon);
        get_if(l, "pyramid_levels", cfg.loss.pyramid_levels);
        get_if(l, "dilate_radius", cfg.loss.dilate_radius);
        get_if(l, "erode_radius", cfg.loss.erode_radius);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        get_if(t, "steps", cfg.train.steps);
        get_if(t, "batch", cfg.train.batch);
        get_if(t, "learning_rate", cfg.train.learning_rate);
        get_if(t, "lr_final_scale", cfg.train.lr_final_scale);
        get_if(t, "seed", cfg.train.seed);
        get_if(t, "resize", cfg.train.resize);
        get_if(t, "augment", cfg.train.augment);
        get_if(t, "max_regions", cfg.train.max_regions);
        get_if(t, "checkpoint_every", cfg.train.checkpoint_every);
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        get_if(d, "synthetic_count", cfg.data.synthetic_count);
        get_if(d, "synthetic_size", cfg.data.synthetic_size);
        get_if(d, "image_dir", cfg.data.image_dir);
        get_if(d, "alpha_dir", cfg.data.alpha_dir);
    }
    get_if(j, "norm_mean", cfg.norm_mean);
    get_if(j, "norm_std", cfg.norm_std);
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return config_from_json(os.str());
}

}  // namespace matte

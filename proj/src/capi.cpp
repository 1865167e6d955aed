#include "matte/capi.h"

#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "matte/flops.hpp"
#include "matte/image_io.hpp"
#include "matte/pipeline.hpp"

namespace {

thread_local std::string g_last_error;

template <typename F>
matte_status guarded(F&& fn) {
    try {
        fn();
        g_last_error.clear();
        return MATTE_OK;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MATTE_ERROR;
    } catch (...) {
        g_last_error = "unknown error";
        return MATTE_ERROR;
    }
}

std::vector<float> image_rgb(const matte::Image& img) {
    if (img.channels == 3) return img.data;
    std::vector<float> out(std::size_t(img.h) * img.w * 3);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out[i * 3] = out[i * 3 + 1] = out[i * 3 + 2] = img.data[i];
    return out;
}

}  // namespace

struct matte_engine {
    matte::Model model;
    explicit matte_engine(matte::Model m) : model(std::move(m)) {}
};

extern "C" {

const char* matte_last_error(void) { return g_last_error.c_str(); }

matte_status matte_train(const char* config_path, const char* out_path,
                         const char* trace_path) {
    return guarded([&] {
        matte::PipelineConfig cfg = matte::load_config(config_path);
        matte::TrainResult result = matte::train(cfg, out_path ? out_path : "");
        if (trace_path) {
            std::ofstream out(trace_path);
            if (!out) throw std::runtime_error(std::string("cannot write ") + trace_path);
            out << result.trace_text;
        }
    });
}

matte_status matte_engine_open(const char* checkpoint_path, matte_engine** out) {
    return guarded([&] {
        matte::Checkpoint ck = matte::load_checkpoint(checkpoint_path);
        *out = new matte_engine(matte::model_from_checkpoint(ck));
    });
}

void matte_engine_close(matte_engine* engine) { delete engine; }

matte_status matte_engine_infer(const matte_engine* engine, const char* in_path,
                                const char* out_path, const char* dump_regions_path) {
    return guarded([&] {
        matte::Image img = matte::read_image(in_path);
        matte::InferResult res =
            matte::infer(engine->model, image_rgb(img), img.h, img.w);
        matte::write_pgm(out_path, res.alpha, res.h, res.w);
        if (dump_regions_path) {
            std::ofstream out(dump_regions_path);
            if (!out)
                throw std::runtime_error(std::string("cannot write ") + dump_regions_path);
            out << res.debug.to_json();
        }
    });
}

matte_status matte_evaluate(const char* checkpoint_path, const char* image_dir,
                            const char* gt_dir, const char* report_path) {
    return guarded([&] {
        matte::Checkpoint ck = matte::load_checkpoint(checkpoint_path);
        matte::Model model = matte::model_from_checkpoint(ck);
        matte::EvalReport report = matte::evaluate(model, image_dir, gt_dir);
        std::ofstream out(report_path);
        if (!out) throw std::runtime_error(std::string("cannot write ") + report_path);
        out << report.to_json();
        std::ofstream txt(std::string(report_path) + ".txt");
        txt << report.to_text();
    });
}

matte_status matte_count_flops(const char* config_path, int width, int height,
                               int64_t n_regions, int64_t* coarse_flops,
                               int64_t* refine_flops, int64_t* total_flops) {
    return guarded([&] {
        matte::PipelineConfig cfg = matte::load_config(config_path);
        matte::FlopReport r = matte::count_flops(cfg, height, width, n_regions);
        if (coarse_flops) *coarse_flops = r.coarse_flops;
        if (refine_flops) *refine_flops = r.refine_flops;
        if (total_flops) *total_flops = r.total;
    });
}

matte_status matte_selftest(void) {
    return guarded([&] {
        if (!matte::selftest(std::cout)) throw std::runtime_error("selftest failed");
    });
}

}  // extern "C"

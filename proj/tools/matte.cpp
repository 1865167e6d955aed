// Command-line frontend; talks to the core only through the C API.

#include <cinttypes>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "matte/capi.h"

namespace {

int fail() {
    std::fprintf(stderr, "error: %s\n", matte_last_error());
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lightweight portrait matting"};
    app.require_subcommand(1);

    std::string config, out, ckpt, in_path, out_path, dump_regions, images, gt, report,
        trace;
    int width = 896, height = 896;
    std::int64_t regions = 0;

    auto* train = app.add_subcommand("train", "train a model from a JSON config");
    train->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out, "checkpoint output path");
    train->add_option("--trace", trace, "write the per-step loss trace to a file");

    auto* infer = app.add_subcommand("infer", "run inference on one image");
    infer->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
    infer->add_option("--in", in_path, "input image (PGM/PPM)")->required();
    infer->add_option("--out", out_path, "output alpha (16-bit PGM)")->required();
    infer->add_option("--dump-regions", dump_regions, "write region debug JSON");

    auto* evalc = app.add_subcommand("eval", "evaluate on paired directories");
    evalc->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
    evalc->add_option("--images", images, "image directory")->required();
    evalc->add_option("--gt", gt, "ground-truth alpha directory")->required();
    evalc->add_option("--report", report, "report output path (JSON; .txt alongside)")
        ->required();

    auto* flops = app.add_subcommand("flops", "analytic FLOP count");
    flops->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
    flops->add_option("--width", width, "input width");
    flops->add_option("--height", height, "input height");
    flops->add_option("--regions", regions, "refined region count");

    auto* selftest = app.add_subcommand("selftest", "run the built-in oracle suite");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) {
        if (matte_train(config.c_str(), out.empty() ? nullptr : out.c_str(),
                        trace.empty() ? nullptr : trace.c_str()) != MATTE_OK)
            return fail();
        std::printf("training complete%s%s\n", out.empty() ? "" : ", checkpoint at ",
                    out.c_str());
    } else if (infer->parsed()) {
        matte_engine* engine = nullptr;
        if (matte_engine_open(ckpt.c_str(), &engine) != MATTE_OK) return fail();
        matte_status st = matte_engine_infer(
            engine, in_path.c_str(), out_path.c_str(),
            dump_regions.empty() ? nullptr : dump_regions.c_str());
        matte_engine_close(engine);
        if (st != MATTE_OK) return fail();
        std::printf("alpha written to %s\n", out_path.c_str());
    } else if (evalc->parsed()) {
        if (matte_evaluate(ckpt.c_str(), images.c_str(), gt.c_str(), report.c_str()) !=
            MATTE_OK)
            return fail();
        std::printf("report written to %s\n", report.c_str());
    } else if (flops->parsed()) {
        std::int64_t coarse = 0, refine = 0, total = 0;
        if (matte_count_flops(config.c_str(), width, height, regions, &coarse, &refine,
                              &total) != MATTE_OK)
            return fail();
        std::printf("coarse_flops %" PRId64 "\nrefine_flops %" PRId64 "\ntotal %" PRId64 "\n",
                    coarse, refine, total);
    } else if (selftest->parsed()) {
        if (matte_selftest() != MATTE_OK) return fail();
        std::printf("selftest passed\n");
    }
    return 0;
}

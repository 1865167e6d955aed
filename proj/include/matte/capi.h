#ifndef MATTE_CAPI_H
#define MATTE_CAPI_H

/* C interface to the matting pipeline. All functions return matte_status;
 * on MATTE_ERROR the message is available via matte_last_error() (thread
 * local). Engines are opaque handles safe for concurrent read-only
 * inference. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum matte_status {
    MATTE_OK = 0,
    MATTE_ERROR = 1
} matte_status;

typedef struct matte_engine matte_engine;

/* Most recent error message on this thread, empty string if none. */
const char* matte_last_error(void);

/* Train per the JSON config; writes the checkpoint to out_path. When
 * trace_path is non-null the per-step loss trace is written there. */
matte_status matte_train(const char* config_path, const char* out_path,
                         const char* trace_path);

matte_status matte_engine_open(const char* checkpoint_path, matte_engine** out);
void matte_engine_close(matte_engine* engine);

/* Reads in_path (PGM/PPM), writes the refined alpha to out_path (16-bit
 * PGM). dump_regions_path, when non-null, receives the region debug JSON. */
matte_status matte_engine_infer(const matte_engine* engine, const char* in_path,
                                const char* out_path, const char* dump_regions_path);

/* Evaluates paired images/ground-truth directories; writes the JSON report
 * to report_path and the aligned-text table to report_path + ".txt". */
matte_status matte_evaluate(const char* checkpoint_path, const char* image_dir,
                            const char* gt_dir, const char* report_path);

matte_status matte_count_flops(const char* config_path, int width, int height,
                               int64_t n_regions, int64_t* coarse_flops,
                               int64_t* refine_flops, int64_t* total_flops);

/* Runs the built-in oracle suite, logging to stdout. */
matte_status matte_selftest(void);

#ifdef __cplusplus
}
#endif

#endif /* MATTE_CAPI_H */

#ifndef MATTE_SYNTH_HPP
#define MATTE_SYNTH_HPP

// Synthetic training data: composites built from the matting equation
// I = alpha*F + (1-alpha)*B with known foreground and background, plus the
// augmentation suite (flip, affine, color jitter with recomposition).

#include <cstdint>
#include <random>
#include <vector>

namespace matte {

struct CompositeSample {
    int h = 0, w = 0;
    std::vector<float> image;  // h*w*3
    std::vector<float> fg;     // h*w*3
    std::vector<float> bg;     // h*w*3
    std::vector<float> alpha;  // h*w
};

struct Placement {
    int row = 0, col = 0;
};

// Pastes the sprite at `placement` over a full-canvas foreground layer and
// composites against the background per the matting equation (exact).
CompositeSample synthesize_sample(const std::vector<float>& fg_sprite,
                                  const std::vector<float>& alpha_sprite, int sprite_h,
                                  int sprite_w, const std::vector<float>& background, int h,
                                  int w, Placement placement);

// Random portrait-like sample: soft-edged blob silhouette plus thin
// hair-like strokes, smooth color fields for F and B. Deterministic in rng.
CompositeSample make_random_sample(int size, std::mt19937_64& rng);

struct AugmentParams {
    bool hflip = false;
    // affine (inverse-mapped bilinear): dst -> src rotation/scale about the
    // center plus translation; identity is {1, 0, 0, 0}
    double scale = 1.0, angle = 0.0, tx = 0.0, ty = 0.0;
    // color jitter applied to F and B in HSV, then I is recomposited
    double hue_shift = 0.0;   // degrees
    double sat_scale = 1.0;
    double val_scale = 1.0;
};

AugmentParams random_augment_params(std::mt19937_64& rng);
CompositeSample augment(const CompositeSample& sample, const AugmentParams& params);
CompositeSample augment(const CompositeSample& sample, std::uint64_t seed);

// Separable Gaussian blur on a single plane (reflect border).
std::vector<float> gaussian_blur(const std::vector<float>& plane, int h, int w, double sigma);

}  // namespace matte

#endif  // MATTE_SYNTH_HPP

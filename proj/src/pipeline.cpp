#include "matte/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "matte/grad_check.hpp"
#include "matte/image_io.hpp"

namespace matte {

namespace fs = std::filesystem;
using nlohmann::json;

Model::Model(const PipelineConfig& cfg_in) : cfg(cfg_in) {
    cfg.validate();
    std::mt19937_64 rng(cfg.train.seed);
    lowres = LowresNet<float>(cfg.backbone, rng);
    refine = RefineNet<float>(cfg.refine, rng);
    lowres.collect(params);
    refine.collect(params);
}

// ---------------------------------------------------------------------------
// optimizer

void Adam::step(ParamMap<float>& params) {
    if (m_.empty()) {
        m_.resize(params.items.size());
        v_.resize(params.items.size());
        for (std::size_t i = 0; i < params.items.size(); ++i) {
            m_[i].assign(params.items[i].second.values().size(), 0.0f);
            v_[i].assign(params.items[i].second.values().size(), 0.0f);
        }
    }
    t_++;
    double bc1 = 1.0 - std::pow(beta1_, double(t_));
    double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        auto& p = params.items[i].second;
        if (!p.has_grad()) continue;
        auto& vals = p.mutable_values();
        const auto& g = p.grad();
        for (std::size_t j = 0; j < vals.size(); ++j) {
            m_[i][j] = static_cast<float>(beta1_ * m_[i][j] + (1.0 - beta1_) * g[j]);
            v_[i][j] = static_cast<float>(beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j]);
            double mhat = m_[i][j] / bc1;
            double vhat = v_[i][j] / bc2;
            vals[j] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

void Adam::zero_grad(ParamMap<float>& params) {
    for (auto& [name, p] : params.items) p.zero_grad();
}

void Adam::export_state(Checkpoint& ck, const ParamMap<float>& params) const {
    if (m_.empty()) return;
    ck.optimizer_state.emplace_back("adam.t",
                                    std::vector<float>{static_cast<float>(t_)});
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        ck.optimizer_state.emplace_back(params.items[i].first + ".m", m_[i]);
        ck.optimizer_state.emplace_back(params.items[i].first + ".v", v_[i]);
    }
}

void Adam::import_state(const Checkpoint& ck, const ParamMap<float>& params) {
    if (ck.optimizer_state.empty()) return;
    m_.assign(params.items.size(), {});
    v_.assign(params.items.size(), {});
    auto find = [&](const std::string& name) -> const std::vector<float>* {
        for (const auto& [n, v] : ck.optimizer_state)
            if (n == name) return &v;
        return nullptr;
    };
    if (const auto* t = find("adam.t")) t_ = static_cast<std::int64_t>((*t)[0]);
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        const auto* m = find(params.items[i].first + ".m");
        const auto* v = find(params.items[i].first + ".v");
        if (!m || !v) throw std::runtime_error("checkpoint: incomplete optimizer state");
        m_[i] = *m;
        v_[i] = *v;
    }
}

// ---------------------------------------------------------------------------
// checkpoint conversion

Checkpoint model_to_checkpoint(const Model& model) {
    Checkpoint ck;
    ck.config_json = config_to_json(model.cfg);
    for (const auto& [name, t] : model.params.items) ck.tensors.emplace_back(name, t);
    return ck;
}

Model model_from_checkpoint(const Checkpoint& ck) {
    Model model(config_from_json(ck.config_json));
    for (const auto& [name, t] : ck.tensors) {
        Tensor<float>* p = model.params.find(name);
        if (!p)
            throw std::runtime_error("checkpoint: incompatible, unknown tensor '" + name + "'");
        if (p->shape() != t.shape())
            throw std::runtime_error("checkpoint: incompatible shape for '" + name + "': " +
                                     shape_str(t.shape()) + " vs " + shape_str(p->shape()));
        p->mutable_values() = t.values();
    }
    if (ck.tensors.size() != model.params.items.size())
        throw std::runtime_error("checkpoint: incompatible, tensor count mismatch");
    return model;
}

// ---------------------------------------------------------------------------
// region selection

namespace {

// Candidates from the predicted uncertain set (optionally unioned with the
// ground-truth uncertain cells), capped at max_regions by predicted
// uncertain probability, returned in row-major order.
std::vector<RegionCoord> pick_regions(const Tensor<float>& trimap8,
                                      const TrimapTarget* gt8, int max_regions) {
    int h = trimap8.dim(0), w = trimap8.dim(1);
    std::vector<std::uint8_t> in_set(std::size_t(h) * w, 0);
    for (const auto& rc : select_uncertain(trimap8.values(), h, w))
        in_set[std::size_t(rc.row) * w + rc.col] = 1;
    if (gt8) {
        if (gt8->h != h || gt8->w != w)
            shape_error("pick_regions: ground-truth trimap grid mismatch");
        for (std::size_t i = 0; i < gt8->classes.size(); ++i)
            if (gt8->classes[i] == kTrimapUncertain) in_set[i] = 1;
    }
    std::vector<int> cells;
    for (int i = 0; i < h * w; ++i)
        if (in_set[std::size_t(i)]) cells.push_back(i);
    if (max_regions >= 0 && static_cast<int>(cells.size()) > max_regions) {
        const auto& tv = trimap8.values();
        std::stable_sort(cells.begin(), cells.end(), [&](int a, int b) {
            return tv[std::size_t(a) * 3 + 2] > tv[std::size_t(b) * 3 + 2];
        });
        cells.resize(std::size_t(max_regions));
        std::sort(cells.begin(), cells.end());
    }
    std::vector<RegionCoord> coords;
    coords.reserve(cells.size());
    for (int c : cells) coords.push_back({c / w, c % w});
    return coords;
}

Tensor<float> normalize_image(const std::vector<float>& rgb, int h, int w, double mean,
                              double stddev) {
    std::vector<float> v(rgb.size());
    for (std::size_t i = 0; i < rgb.size(); ++i)
        v[i] = static_cast<float>((rgb[i] - mean) / stddev);
    return Tensor<float>({h, w, 3}, std::move(v));
}

Tensor<float> upsample_alpha(const Tensor<float>& alpha8, int factor) {
    int h = alpha8.dim(0), w = alpha8.dim(1);
    Tensor<float> up = bilinear_upsample(reshape(alpha8, {h, w, 1}), factor);
    return reshape(up, {h * factor, w * factor});
}

std::vector<std::vector<int>> region_bias_slots(const std::vector<RegionCoord>& coords,
                                                const std::vector<std::vector<int>>& knn,
                                                int s) {
    std::vector<std::vector<int>> slots(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        slots[i].push_back(bias_index(coords[i], coords[i], s));
        for (int j : knn[i]) slots[i].push_back(bias_index(coords[i], coords[std::size_t(j)], s));
    }
    return slots;
}

}  // namespace

// ---------------------------------------------------------------------------
// training losses

StepLosses forward_losses(Model& model, const CompositeSample& sample) {
    int h = sample.h, w = sample.w;
    if (h < 224 || w < 224 || h % 32 != 0 || w % 32 != 0)
        throw std::invalid_argument("forward_losses: sample dims must be >= 224 and /32");
    const auto& lcfg = model.cfg.loss;
    Tensor<float> image =
        normalize_image(sample.image, h, w, model.cfg.norm_mean, model.cfg.norm_std);
    CoarseOutput<float> coarse = model.lowres.forward(image);
    TrimapPyramid pyr = make_pseudo_trimap(sample.alpha, h, w, lcfg);
    auto a8 = downsample_average(sample.alpha, h, w, 8);
    auto a16 = downsample_average(sample.alpha, h, w, 16);
    auto a32 = downsample_average(sample.alpha, h, w, 32);

    std::vector<std::pair<std::string, Tensor<float>>> comps;
    comps.emplace_back("alpha8", loss_coarse_alpha(coarse.alpha8, a8));
    comps.emplace_back("alpha16", loss_coarse_alpha(coarse.alpha16, a16));
    comps.emplace_back("alpha32", loss_coarse_alpha(coarse.alpha32, a32));
    comps.emplace_back("trimap8", loss_trimap_focal(coarse.trimap8, pyr.at8));
    comps.emplace_back("trimap16", loss_trimap_focal(coarse.trimap16, pyr.at16));
    comps.emplace_back("trimap32", loss_trimap_focal(coarse.trimap32, pyr.at32));

    Tensor<float> up_alpha = upsample_alpha(coarse.alpha8, 8);
    Tensor<float> raw({h, w, 3}, sample.image);
    Tensor<float> rgba = concat({raw, reshape(up_alpha, {h, w, 1})}, 2);
    std::vector<RegionCoord> coords =
        pick_regions(coarse.trimap8, &pyr.at8, model.cfg.train.max_regions);
    auto knn = knn_bruteforce(coords, model.cfg.refine.k);
    Tensor<float> crops = crop_regions(rgba, coords);
    Tensor<float> refined = model.refine.forward(crops, coords, knn);
    Tensor<float> pred = paste_regions(up_alpha, coords, refined);

    Tensor<float> gt({h, w}, sample.alpha);
    Tensor<float> fg({h, w, 3}, sample.fg);
    Tensor<float> bg({h, w, 3}, sample.bg);
    comps.emplace_back("alpha", loss_alpha(pred, gt, lcfg.epsilon));
    comps.emplace_back("lap", loss_laplacian(pred, gt, lcfg.epsilon, lcfg.pyramid_levels));
    comps.emplace_back("comp", loss_composition(pred, gt, fg, bg, lcfg.epsilon));

    StepLosses out;
    out.total = total_loss(comps);
    out.n_regions = static_cast<int>(coords.size());
    for (const auto& [name, t] : comps) out.components.emplace_back(name, t.item());
    return out;
}

// ---------------------------------------------------------------------------
// training loop

namespace {

std::vector<float> to_alpha_plane(const Image& img) {
    if (img.channels == 1) return img.data;
    std::vector<float> out(std::size_t(img.h) * img.w);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (img.data[i * 3] + img.data[i * 3 + 1] + img.data[i * 3 + 2]) / 3.0f;
    return out;
}

std::vector<float> to_rgb(const Image& img) {
    if (img.channels == 3) return img.data;
    std::vector<float> out(std::size_t(img.h) * img.w * 3);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out[i * 3] = out[i * 3 + 1] = out[i * 3 + 2] = img.data[i];
    return out;
}

// Bilinear resize with src = (dst + 0.5) * scale - 0.5, edge clamped.
std::vector<float> resize_plane(const std::vector<float>& x, int h, int w, int ch, int oh,
                                int ow) {
    if (oh == h && ow == w) return x;
    std::vector<float> out(std::size_t(oh) * ow * ch);
    double sy = double(h) / oh, sx = double(w) / ow;
    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
            double fy = (i + 0.5) * sy - 0.5, fx = (j + 0.5) * sx - 0.5;
            int i0 = static_cast<int>(std::floor(fy)), j0 = static_cast<int>(std::floor(fx));
            double wy = fy - i0, wx = fx - j0;
            int i1 = std::clamp(i0 + 1, 0, h - 1), j1 = std::clamp(j0 + 1, 0, w - 1);
            i0 = std::clamp(i0, 0, h - 1);
            j0 = std::clamp(j0, 0, w - 1);
            for (int c = 0; c < ch; ++c) {
                auto at = [&](int ii, int jj) {
                    return double(x[(std::size_t(ii) * w + jj) * ch + c]);
                };
                out[(std::size_t(i) * ow + j) * ch + c] = static_cast<float>(
                    (1 - wy) * ((1 - wx) * at(i0, j0) + wx * at(i0, j1)) +
                    wy * ((1 - wx) * at(i1, j0) + wx * at(i1, j1)));
            }
        }
    return out;
}

std::vector<CompositeSample> load_training_samples(const PipelineConfig& cfg) {
    std::vector<CompositeSample> samples;
    if (!cfg.data.image_dir.empty()) {
        int sz = cfg.train.resize;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(cfg.data.image_dir))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            fs::path gt = fs::path(cfg.data.alpha_dir) / f.filename();
            if (!fs::exists(gt))
                throw std::runtime_error("train: no alpha for '" + f.string() + "'");
            Image im = read_image(f.string());
            Image al = read_image(gt.string());
            CompositeSample s;
            s.h = sz;
            s.w = sz;
            s.image = resize_plane(to_rgb(im), im.h, im.w, 3, sz, sz);
            s.alpha = resize_plane(to_alpha_plane(al), al.h, al.w, 1, sz, sz);
            // no separate F/B layers on disk; composition loss degenerates
            s.fg = s.image;
            s.bg = s.image;
            samples.push_back(std::move(s));
        }
        if (samples.empty()) throw std::runtime_error("train: image_dir is empty");
    } else {
        int sz = cfg.data.synthetic_size;
        if (sz < 224 || sz % 32 != 0)
            throw std::invalid_argument("train: synthetic_size must be >= 224 and /32");
        std::mt19937_64 rng(cfg.train.seed ^ 0x9e3779b97f4a7c15ull);
        for (int i = 0; i < cfg.data.synthetic_count; ++i)
            samples.push_back(make_random_sample(sz, rng));
        if (samples.empty()) throw std::invalid_argument("train: synthetic_count must be > 0");
    }
    return samples;
}

std::string format_step(int step, const StepLosses& losses) {
    char buf[128];
    std::string line = "step " + std::to_string(step);
    std::snprintf(buf, sizeof buf, " total %.17g", double(losses.total.item()));
    line += buf;
    for (const auto& [name, v] : losses.components) {
        std::snprintf(buf, sizeof buf, " %s %.17g", name.c_str(), double(v));
        line += buf;
    }
    line += " regions " + std::to_string(losses.n_regions);
    return line;
}

}  // namespace

TrainResult train(const PipelineConfig& cfg, const std::string& out_path, std::ostream* log) {
    cfg.validate();
    Model model(cfg);
    Adam opt(cfg.train.learning_rate);
    std::vector<CompositeSample> samples = load_training_samples(cfg);
    TrainResult result;
    for (int step = 1; step <= cfg.train.steps; ++step) {
        if (cfg.train.lr_final_scale < 1.0) {
            double u = cfg.train.steps > 1 ? double(step - 1) / (cfg.train.steps - 1) : 0.0;
            double fade = 0.5 * (1.0 + std::cos(u * 3.14159265358979323846));
            opt.set_lr(cfg.train.learning_rate *
                       (cfg.train.lr_final_scale + (1.0 - cfg.train.lr_final_scale) * fade));
        }
        const CompositeSample& base = samples[std::size_t((step - 1) % samples.size())];
        StepLosses losses;
        if (cfg.train.augment) {
            CompositeSample aug =
                augment(base, cfg.train.seed * 1000003ull + std::uint64_t(step));
            losses = forward_losses(model, aug);
        } else {
            losses = forward_losses(model, base);
        }
        backward(losses.total);
        opt.step(model.params);
        opt.zero_grad(model.params);
        result.total_trace.push_back(double(losses.total.item()));
        std::string line = format_step(step, losses);
        result.trace_text += line + "\n";
        if (log) *log << line << "\n";
        if (cfg.train.checkpoint_every > 0 && !out_path.empty() &&
            step % cfg.train.checkpoint_every == 0) {
            Checkpoint ck = model_to_checkpoint(model);
            opt.export_state(ck, model.params);
            save_checkpoint(out_path, ck);
        }
    }
    result.checkpoint = model_to_checkpoint(model);
    opt.export_state(result.checkpoint, model.params);
    if (!out_path.empty()) save_checkpoint(out_path, result.checkpoint);
    return result;
}

// ---------------------------------------------------------------------------
// inference

std::string RegionDebug::to_json() const {
    json j;
    j["coords"] = json::array();
    for (const auto& rc : coords) j["coords"].push_back({rc.row, rc.col});
    j["knn"] = knn;
    j["bias_slots"] = bias_slots;
    return j.dump(2);
}

InferResult infer(const Model& model, const std::vector<float>& rgb, int h, int w,
                  bool use_refine) {
    if (rgb.size() != std::size_t(h) * w * 3)
        throw std::invalid_argument("infer: image buffer size mismatch");
    NoGradGuard ng;
    int ph = std::max(224, (h + 31) / 32 * 32);
    int pw = std::max(224, (w + 31) / 32 * 32);
    std::vector<float> padded(std::size_t(ph) * pw * 3, 0.0f);
    for (int i = 0; i < h; ++i)
        std::copy(rgb.begin() + std::size_t(i) * w * 3, rgb.begin() + std::size_t(i + 1) * w * 3,
                  padded.begin() + std::size_t(i) * pw * 3);
    Tensor<float> image =
        normalize_image(padded, ph, pw, model.cfg.norm_mean, model.cfg.norm_std);
    CoarseOutput<float> coarse = model.lowres.forward(image);
    Tensor<float> up_alpha = upsample_alpha(coarse.alpha8, 8);

    InferResult out;
    out.h = h;
    out.w = w;
    out.trimap_h = ph / 8;
    out.trimap_w = pw / 8;
    out.trimap = coarse.trimap8.values();
    Tensor<float> pred = up_alpha;
    if (use_refine) {
        Tensor<float> raw({ph, pw, 3}, padded);
        Tensor<float> rgba = concat({raw, reshape(up_alpha, {ph, pw, 1})}, 2);
        out.debug.coords = pick_regions(coarse.trimap8, nullptr, model.cfg.train.max_regions);
        out.debug.knn = knn_kdtree(out.debug.coords, model.cfg.refine.k);
        out.debug.bias_slots =
            region_bias_slots(out.debug.coords, out.debug.knn, model.cfg.refine.s);
        Tensor<float> crops = crop_regions(rgba, out.debug.coords);
        Tensor<float> refined = model.refine.forward(crops, out.debug.coords, out.debug.knn);
        pred = paste_regions(up_alpha, out.debug.coords, refined);
    }
    out.alpha.resize(std::size_t(h) * w);
    out.alpha_coarse.resize(std::size_t(h) * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            out.alpha[std::size_t(i) * w + j] = pred.values()[std::size_t(i) * pw + j];
            out.alpha_coarse[std::size_t(i) * w + j] =
                up_alpha.values()[std::size_t(i) * pw + j];
        }
    return out;
}

// ---------------------------------------------------------------------------
// evaluation

std::string EvalReport::to_json() const {
    json j;
    j["images"] = json::array();
    for (const auto& im : images)
        j["images"].push_back({{"name", im.name},
                               {"sad", im.values.sad},
                               {"sad_t", im.values.sad_t},
                               {"grad", im.values.grad},
                               {"conn", im.values.conn}});
    j["mean"] = {{"sad", mean.sad},
                 {"sad_t", mean.sad_t},
                 {"grad", mean.grad},
                 {"conn", mean.conn}};
    return j.dump(2);
}

std::string EvalReport::to_text() const {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof buf, "%-24s %12s %12s %12s %12s\n", "image", "SAD", "SAD-T",
                  "Grad", "Conn");
    out += buf;
    auto row = [&](const std::string& name, const MetricValues& v) {
        std::snprintf(buf, sizeof buf, "%-24s %12.4f %12.4f %12.4f %12.4f\n", name.c_str(),
                      v.sad, v.sad_t, v.grad, v.conn);
        out += buf;
    };
    for (const auto& im : images) row(im.name, im.values);
    row("mean", mean);
    return out;
}

EvalReport evaluate(const Model& model, const std::string& image_dir,
                    const std::string& gt_dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(image_dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("evaluate: no images in '" + image_dir + "'");
    EvalReport report;
    for (const auto& f : files) {
        fs::path gt_path = fs::path(gt_dir) / f.filename();
        if (!fs::exists(gt_path))
            throw std::runtime_error("evaluate: unpaired image '" + f.string() +
                                     "', no ground truth " + gt_path.string());
        Image im = read_image(f.string());
        Image gt_im = read_image(gt_path.string());
        std::vector<float> gt = to_alpha_plane(gt_im);
        if (gt_im.h != im.h || gt_im.w != im.w)
            throw std::runtime_error("evaluate: size mismatch for '" + f.string() + "'");
        InferResult inf = infer(model, to_rgb(im), im.h, im.w);
        TrimapPyramid pyr = make_pseudo_trimap(gt, im.h, im.w, model.cfg.loss);
        std::vector<std::uint8_t> mask(gt.size(), 0);
        for (std::size_t i = 0; i < gt.size(); ++i)
            mask[i] = pyr.full.classes[i] == kTrimapUncertain;
        ImageMetrics m;
        m.name = f.filename().string();
        m.values.sad = metric_sad(inf.alpha, gt);
        m.values.sad_t = metric_sad_t(inf.alpha, gt, mask);
        m.values.grad = metric_grad(inf.alpha, gt, im.h, im.w);
        m.values.conn = metric_conn(inf.alpha, gt, im.h, im.w);
        report.mean.sad += m.values.sad;
        report.mean.sad_t += m.values.sad_t;
        report.mean.grad += m.values.grad;
        report.mean.conn += m.values.conn;
        report.images.push_back(std::move(m));
    }
    double n = double(report.images.size());
    report.mean.sad /= n;
    report.mean.sad_t /= n;
    report.mean.grad /= n;
    report.mean.conn /= n;
    return report;
}

// ---------------------------------------------------------------------------
// selftest

bool selftest(std::ostream& log) {
    bool ok = true;
    auto check = [&](const std::string& name, bool pass) {
        log << (pass ? "[ok]   " : "[FAIL] ") << name << "\n";
        ok = ok && pass;
    };
    std::mt19937_64 rng(7);
    {
        std::vector<Tensor<double>> xs{Tensor<double>::randn({3, 4}, rng, 1.0, true)};
        auto rep = grad_check(
            "square", [](std::vector<Tensor<double>>& in) { return sum(square(in[0])); }, xs);
        check("autodiff square", rep.passed);
    }
    {
        std::vector<Tensor<double>> xs{Tensor<double>::randn({3, 4}, rng, 1.0, true),
                                       Tensor<double>::randn({5, 4}, rng, 1.0, true),
                                       Tensor<double>::randn({5, 4}, rng, 1.0, true),
                                       Tensor<double>::randn({5}, rng, 1.0, true)};
        auto rep = grad_check(
            "attention",
            [](std::vector<Tensor<double>>& in) {
                return sum(attention(in[0], in[1], in[2], in[3]));
            },
            xs);
        check("autodiff attention", rep.passed);
    }
    {
        std::uniform_int_distribution<int> d(0, 60);
        std::vector<std::uint8_t> used(61 * 61, 0);
        std::vector<RegionCoord> coords;
        while (coords.size() < 300) {
            RegionCoord rc{d(rng), d(rng)};
            auto& u = used[std::size_t(rc.row) * 61 + rc.col];
            if (!u) {
                u = 1;
                coords.push_back(rc);
            }
        }
        check("knn kd-tree equals brute force", knn_kdtree(coords, 8) == knn_bruteforce(coords, 8));
    }
    {
        bool bij = true;
        std::vector<int> seen(std::size_t(bias_table_size(4)), 0);
        for (int dr = -3; dr <= 3; ++dr)
            for (int dc = -3; dc <= 3; ++dc)
                seen[std::size_t(bias_index({10, 10}, {10 + dr, 10 + dc}, 4))]++;
        for (int i = 0; i < bias_table_size(4) - 1; ++i) bij = bij && seen[std::size_t(i)] == 1;
        check("bias table in-range bijection", bij && seen[std::size_t(bias_table_size(4) - 1)] == 0);
    }
    {
        Tensor<float> t = Tensor<float>::randn({8, 8, 3}, rng, 1.0);
        check("pixel shuffle round trip",
              pixel_shuffle(pixel_unshuffle(t, 2), 2).values() == t.values());
    }
    {
        PipelineConfig cfg;
        cfg.backbone.embed_dim = 8;
        cfg.backbone.depths = {1, 1};
        cfg.backbone.num_heads = {2, 2};
        Model model(cfg);
        fs::path tmp = fs::temp_directory_path() / "matte_selftest.ckpt";
        Checkpoint ck = model_to_checkpoint(model);
        save_checkpoint(tmp.string(), ck);
        Checkpoint back = load_checkpoint(tmp.string());
        bool same = back.tensors.size() == ck.tensors.size();
        for (std::size_t i = 0; same && i < ck.tensors.size(); ++i)
            same = back.tensors[i].first == ck.tensors[i].first &&
                   back.tensors[i].second.values() == ck.tensors[i].second.values();
        fs::remove(tmp);
        check("checkpoint round trip", same);
    }
    return ok;
}

int thread_cap() {
    if (const char* env = std::getenv("MATTE_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

}  // namespace matte

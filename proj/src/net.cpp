#include "rtn/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rtn/synth.hpp"

namespace rtn {

std::string backbone_name(Backbone b) {
    switch (b) {
        case Backbone::GA: return "GA";
        case Backbone::LA: return "LA";
        default: return "GLA";
    }
}

Backbone backbone_from_name(const std::string& s) {
    if (s == "GA" || s == "ga") return Backbone::GA;
    if (s == "LA" || s == "la") return Backbone::LA;
    if (s == "GLA" || s == "gla") return Backbone::GLA;
    throw std::invalid_argument("unknown backbone '" + s + "'");
}

RtnConfig tiny_config() {
    RtnConfig cfg;
    cfg.grid_k = 3;
    cfg.m_keypoints = 32;
    cfg.knn_k = 8;
    cfg.global_mlp_widths = {16, 16, 32};
    cfg.global_fc_width = 32;
    cfg.edgeconv_widths = {16, 16, 16, 16};
    cfg.aggregate_width = 32;
    cfg.local_fc_width = 32;
    cfg.head_widths = {32};
    return cfg;
}

RtnConfig small_config(int grid_k) {
    RtnConfig cfg;
    cfg.grid_k = grid_k;
    cfg.m_keypoints = 48;
    cfg.knn_k = 8;
    cfg.global_mlp_widths = {32, 64, 128};
    cfg.global_fc_width = 128;
    cfg.edgeconv_widths = {24, 24, 32, 32};
    cfg.aggregate_width = 64;
    cfg.local_fc_width = 64;
    cfg.head_widths = {128};
    return cfg;
}

std::vector<ParamSpec> param_specs(const RtnConfig& cfg) {
    for (int w : cfg.global_mlp_widths) {
        if (w <= 0) throw std::invalid_argument("rtn config: nonpositive width");
    }
    for (int w : cfg.edgeconv_widths) {
        if (w <= 0) throw std::invalid_argument("rtn config: nonpositive width");
    }
    std::vector<ParamSpec> specs;
    auto linear = [&specs](const std::string& name, int out, int in) {
        specs.push_back({name + ".w", {out, in}});
        specs.push_back({name + ".b", {out}});
    };
    int fused = 0;
    if (cfg.has_global()) {
        int ci = 3;
        for (size_t l = 0; l < cfg.global_mlp_widths.size(); ++l) {
            linear("global.mlp" + std::to_string(l), cfg.global_mlp_widths[l], ci);
            ci = cfg.global_mlp_widths[l];
        }
        linear("global.fc", cfg.global_fc_width, ci);
        fused += cfg.global_fc_width;
    }
    if (cfg.has_local()) {
        int ci = 3;
        int concat_w = 0;
        for (size_t l = 0; l < cfg.edgeconv_widths.size(); ++l) {
            linear("local.ec" + std::to_string(l), cfg.edgeconv_widths[l], 2 * ci);
            ci = cfg.edgeconv_widths[l];
            concat_w += ci;
        }
        linear("local.agg", cfg.aggregate_width, 2 * concat_w);
        linear("local.fc", cfg.local_fc_width, cfg.aggregate_width);
        fused += cfg.local_fc_width;
    }
    int ci = fused;
    for (size_t l = 0; l < cfg.head_widths.size(); ++l) {
        linear("head.fc" + std::to_string(l), cfg.head_widths[l], ci);
        ci = cfg.head_widths[l];
    }
    linear("head.out", cfg.n_outputs(), ci);
    return specs;
}

std::vector<float> rtn_forward(const PointCloud& cloud, const ModelParams<float>& params,
                               const RtnConfig& cfg) {
    return rtn_forward(prepare_input<float>(cloud, cfg), params, cfg);
}

int argmax_class(const std::vector<float>& logits) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
        if (logits[static_cast<size_t>(i)] > logits[static_cast<size_t>(best)]) best = i;
    }
    return best;
}

std::pair<PointCloud, ClassId> normalize_pose(const PointCloud& cloud,
                                              const ModelParams<float>& params,
                                              const RtnConfig& cfg,
                                              const DiscretizationGrid& grid) {
    const std::vector<float> logits = rtn_forward(cloud, params, cfg);
    const ClassId c = argmax_class(logits);
    return {apply_rotation(inverse(grid.class_to_matrix(c)), cloud), c};
}

TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const RtnConfig& cfg,
                  const TrainOptions& opt) {
    if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
    const int n_out = cfg.n_outputs();
    for (const TrainSample& s : train_set) {
        if (s.label < 0 || s.label >= n_out) {
            throw std::invalid_argument("train: label out of range for model output");
        }
    }
    if (opt.aug_rotations) {
        if (cfg.out_classes != 0) {
            throw std::invalid_argument("train: rotation augmentation needs a grid classifier");
        }
        for (const TrainSample& s : train_set) {
            if (!s.has_rotation) {
                throw std::invalid_argument("train: rotation augmentation needs truth rotations");
            }
        }
    }
    const DiscretizationGrid aug_grid = DiscretizationGrid::from_k(cfg.grid_k);
    TrainResult result;
    result.params = init_params<float>(cfg);
    ModelParams<float>& params = result.params;

    // graph structure per sample is fixed, compute once
    std::vector<RtnInput<float>> inputs;
    inputs.reserve(train_set.size());
    for (const TrainSample& s : train_set) inputs.push_back(prepare_input<float>(s.cloud, cfg));
    std::vector<RtnInput<float>> val_inputs;
    val_inputs.reserve(val_set.size());
    for (const TrainSample& s : val_set) val_inputs.push_back(prepare_input<float>(s.cloud, cfg));

    auto val_top1 = [&]() {
        if (val_set.empty()) return std::numeric_limits<double>::quiet_NaN();
        int hit = 0;
        for (size_t i = 0; i < val_set.size(); ++i) {
            const std::vector<float> logits = rtn_forward(val_inputs[i], params, cfg);
            if (argmax_class(logits) == val_set[i].label) ++hit;
        }
        return static_cast<double>(hit) / static_cast<double>(val_set.size());
    };
    auto mean_train_loss = [&]() {
        double sum = 0.0;
        for (size_t i = 0; i < train_set.size(); ++i) {
            const std::vector<float> logits = rtn_forward(inputs[i], params, cfg);
            sum += cross_entropy(logits, train_set[i].label);
        }
        return sum / static_cast<double>(train_set.size());
    };

    result.log.push_back({0, mean_train_loss(), val_top1()});

    // Adam state, double precision accumulators
    std::vector<std::vector<double>> m(params.tensors.size()), v(params.tensors.size());
    for (size_t t = 0; t < params.tensors.size(); ++t) {
        m[t].assign(params.tensors[t].data.size(), 0.0);
        v[t].assign(params.tensors[t].data.size(), 0.0);
    }
    long step = 0;
    std::vector<int> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, 0xe90cULL, static_cast<std::uint64_t>(epoch)));
        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<size_t>(shuffle_rng.below(i))]);
        }
        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opt.batch)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(opt.batch));
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            std::vector<std::vector<double>> acc(params.tensors.size());
            for (size_t t = 0; t < params.tensors.size(); ++t) {
                acc[t].assign(params.tensors[t].data.size(), 0.0);
            }
            for (size_t bi = start; bi < end; ++bi) {
                const int idx = order[bi];
                float loss = 0.0f;
                const RtnInput<float>* input = &inputs[static_cast<size_t>(idx)];
                int label = train_set[static_cast<size_t>(idx)].label;
                RtnInput<float> augmented;
                Rng aug_rng(mix_seed(cfg.seed, 0xa406ULL,
                                     static_cast<std::uint64_t>(step) * order.size() + bi));
                if (opt.aug_rotations) {
                    // compose the sample with an exact grid rotation; the FPS
                    // indices and kNN graphs are rotation invariant, so only
                    // the coordinates and the label change
                    const int gc = static_cast<int>(aug_rng.below(
                        static_cast<std::uint64_t>(aug_grid.n())));
                    const Mat3 gr = aug_grid.class_to_matrix(gc);
                    augmented = *input;
                    for (size_t p = 0; p + 2 < augmented.coords.size(); p += 3) {
                        const Vec3 q = gr * Vec3(augmented.coords[p],
                                                 augmented.coords[p + 1],
                                                 augmented.coords[p + 2]);
                        augmented.coords[p] = static_cast<float>(q.x());
                        augmented.coords[p + 1] = static_cast<float>(q.y());
                        augmented.coords[p + 2] = static_cast<float>(q.z());
                    }
                    label = aug_grid.quantize(
                        gr * train_set[static_cast<size_t>(idx)].truth_rotation);
                    input = &augmented;
                }
                if (opt.aug_jitter > 0.0) {
                    if (input != &augmented) augmented = *input;
                    for (float& c : augmented.coords) {
                        c += static_cast<float>(opt.aug_jitter * aug_rng.gaussian());
                    }
                    input = &augmented;
                }
                const ModelParams<float> g = rtn_backward(
                    *input, params, cfg, label, &loss);
                epoch_loss += loss;
                for (size_t t = 0; t < g.tensors.size(); ++t) {
                    const std::vector<float>& gd = g.tensors[t].data;
                    for (size_t e = 0; e < gd.size(); ++e) acc[t][e] += gd[e];
                }
            }
            ++step;
            const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
            for (size_t t = 0; t < params.tensors.size(); ++t) {
                std::vector<float>& w = params.tensors[t].data;
                for (size_t e = 0; e < w.size(); ++e) {
                    const double g = acc[t][e] * inv_batch;
                    m[t][e] = opt.beta1 * m[t][e] + (1.0 - opt.beta1) * g;
                    v[t][e] = opt.beta2 * v[t][e] + (1.0 - opt.beta2) * g * g;
                    const double mhat = m[t][e] / bc1;
                    const double vhat = v[t][e] / bc2;
                    w[e] -= static_cast<float>(opt.lr * mhat / (std::sqrt(vhat) + opt.eps));
                }
            }
        }
        result.log.push_back({epoch, epoch_loss / static_cast<double>(order.size()), val_top1()});
    }
    return result;
}

}  // namespace rtn

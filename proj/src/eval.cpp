#include "rtn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rtn {

std::string config_digest(const RtnConfig& cfg) {
    // FNV-1a over the canonical parameter table plus the core fields
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    mix(static_cast<std::uint64_t>(cfg.grid_k));
    mix(static_cast<std::uint64_t>(cfg.backbone));
    mix(static_cast<std::uint64_t>(cfg.m_keypoints));
    mix(static_cast<std::uint64_t>(cfg.knn_k));
    mix(static_cast<std::uint64_t>(cfg.out_classes));
    for (const ParamSpec& s : param_specs(cfg)) {
        for (char c : s.name) mix(static_cast<std::uint64_t>(c));
        for (int d : s.shape) mix(static_cast<std::uint64_t>(d));
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["top1"] = top1;
    j["top5"] = top5;
    j["mean_incd"] = mean_incd;
    j["mean_outcd"] = mean_outcd;
    nlohmann::ordered_json pc = nlohmann::ordered_json::array();
    for (const auto& [cls, acc] : per_class_accuracy) {
        pc.push_back({{"class", cls}, {"accuracy", acc}});
    }
    j["per_class_accuracy"] = pc;
    j["n_samples"] = n_samples;
    j["seed"] = seed;
    j["config_digest"] = config_digest;
    return j.dump(2);
}

namespace {

int predict(const Predictor& pred, const LabeledSample& s) {
    if (pred.oracle) return s.label;
    return argmax_class(rtn_forward(s.cloud, *pred.params, *pred.cfg));
}

std::vector<float> predict_logits(const Predictor& pred, const LabeledSample& s,
                                  int n_classes) {
    if (pred.oracle) {
        std::vector<float> logits(static_cast<size_t>(n_classes), 0.0f);
        logits[static_cast<size_t>(s.label)] = 1.0f;
        return logits;
    }
    return rtn_forward(s.cloud, *pred.params, *pred.cfg);
}

}  // namespace

std::pair<double, double> rotation_accuracy(const Predictor& pred,
                                            const std::vector<LabeledSample>& samples,
                                            int n_classes) {
    if (samples.empty()) throw std::invalid_argument("rotation_accuracy: no samples");
    int hit1 = 0, hit5 = 0;
    for (const LabeledSample& s : samples) {
        if (s.label >= n_classes) {
            throw std::invalid_argument("rotation_accuracy: label exceeds class count");
        }
        const std::vector<float> logits = predict_logits(pred, s, n_classes);
        const float truth_logit = logits[static_cast<size_t>(s.label)];
        // rank = number of classes strictly better, plus equal-valued
        // classes with a smaller id (argmax tie rule)
        int rank = 0;
        for (int c = 0; c < n_classes; ++c) {
            const float v = logits[static_cast<size_t>(c)];
            if (v > truth_logit || (v == truth_logit && c < s.label)) ++rank;
        }
        if (rank == 0) ++hit1;
        if (rank < 5) ++hit5;
    }
    const double n = static_cast<double>(samples.size());
    return {hit1 / n, hit5 / n};
}

std::pair<double, double> mean_in_out_cd(const Predictor& pred,
                                         const DiscretizationGrid& grid,
                                         const RotationDataset& ds,
                                         const std::vector<int>& sample_indices) {
    if (sample_indices.empty()) throw std::invalid_argument("mean_in_out_cd: no samples");
    double sum_in = 0.0, sum_out = 0.0;
    for (int idx : sample_indices) {
        const LabeledSample& s = ds.samples[static_cast<size_t>(idx)];
        const size_t src = static_cast<size_t>(s.source_cloud_id);
        if (src >= ds.sources.size() || ds.sources[src].points.empty()) {
            throw std::invalid_argument("mean_in_out_cd: missing aligned original for source " +
                                        std::to_string(s.source_cloud_id));
        }
        const PointCloud& aligned = ds.sources[src];
        sum_in += chamfer_distance(s.cloud, aligned);
        const ClassId c = predict(pred, s);
        const PointCloud restored = apply_rotation(inverse(grid.class_to_matrix(c)), s.cloud);
        sum_out += chamfer_distance(restored, aligned);
    }
    const double n = static_cast<double>(sample_indices.size());
    return {sum_in / n, sum_out / n};
}

EvalReport evaluate(const Predictor& pred, const DiscretizationGrid& grid,
                    const RotationDataset& ds, const std::vector<int>& sample_indices,
                    std::uint64_t seed) {
    std::vector<LabeledSample> samples;
    samples.reserve(sample_indices.size());
    for (int i : sample_indices) samples.push_back(ds.samples[static_cast<size_t>(i)]);

    EvalReport rep;
    rep.n_samples = static_cast<int>(samples.size());
    rep.seed = seed;
    rep.config_digest = pred.oracle ? "oracle" : rtn::config_digest(*pred.cfg);
    std::tie(rep.top1, rep.top5) = rotation_accuracy(pred, samples, grid.n());
    std::tie(rep.mean_incd, rep.mean_outcd) = mean_in_out_cd(pred, grid, ds, sample_indices);

    std::vector<int> per_class_hit(static_cast<size_t>(grid.n()), 0);
    std::vector<int> per_class_total(static_cast<size_t>(grid.n()), 0);
    for (const LabeledSample& s : samples) {
        ++per_class_total[static_cast<size_t>(s.label)];
        if (predict(pred, s) == s.label) ++per_class_hit[static_cast<size_t>(s.label)];
    }
    for (int c = 0; c < grid.n(); ++c) {
        if (per_class_total[static_cast<size_t>(c)] > 0) {
            rep.per_class_accuracy.emplace_back(
                c, static_cast<double>(per_class_hit[static_cast<size_t>(c)]) /
                       per_class_total[static_cast<size_t>(c)]);
        }
    }
    return rep;
}

ClassifierMetrics classifier_metrics(const std::vector<int>& predicted,
                                     const std::vector<int>& truth, int n_classes) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw std::invalid_argument("classifier_metrics: bad inputs");
    }
    std::vector<int> hit(static_cast<size_t>(n_classes), 0);
    std::vector<int> total(static_cast<size_t>(n_classes), 0);
    int correct = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        ++total[static_cast<size_t>(truth[i])];
        if (predicted[i] == truth[i]) {
            ++correct;
            ++hit[static_cast<size_t>(truth[i])];
        }
    }
    ClassifierMetrics m;
    m.ins = static_cast<double>(correct) / static_cast<double>(truth.size());
    double sum = 0.0;
    int seen = 0;
    m.per_class.resize(static_cast<size_t>(n_classes), 0.0);
    for (int c = 0; c < n_classes; ++c) {
        if (total[static_cast<size_t>(c)] > 0) {
            m.per_class[static_cast<size_t>(c)] =
                static_cast<double>(hit[static_cast<size_t>(c)]) / total[static_cast<size_t>(c)];
            sum += m.per_class[static_cast<size_t>(c)];
            ++seen;
        }
    }
    if (seen < 2) throw std::invalid_argument("classifier_metrics: single-class dataset");
    m.mcls = sum / seen;
    return m;
}

RtnConfig toy_classifier_config(int n_points, int n_classes, std::uint64_t seed) {
    RtnConfig cfg;
    cfg.backbone = Backbone::GA;
    cfg.grid_k = 3;  // unused, out_classes overrides the head size
    cfg.out_classes = n_classes;
    cfg.m_keypoints = std::min(64, n_points);
    cfg.global_mlp_widths = {32, 64};
    cfg.global_fc_width = 32;
    cfg.head_widths = {};
    cfg.seed = seed;
    return cfg;
}

ToyResult train_toy_classifier(const std::vector<TrainSample>& train_set,
                               const std::vector<TrainSample>& test_set, int n_classes,
                               int epochs, std::uint64_t seed) {
    if (train_set.empty()) throw std::invalid_argument("train_toy_classifier: empty dataset");
    bool multi = false;
    for (const TrainSample& s : train_set) {
        if (s.label != train_set.front().label) multi = true;
    }
    if (!multi) throw std::invalid_argument("train_toy_classifier: single-class dataset");
    ToyResult r;
    r.cfg = toy_classifier_config(static_cast<int>(train_set.front().cloud.size()), n_classes,
                                  seed);
    TrainOptions opt;
    opt.epochs = epochs;
    // small batches: the zero-initialized final layer needs a few dozen steps
    // before gradient reaches the lower layers at all
    opt.batch = 8;
    TrainResult tr = train(train_set, {}, r.cfg, opt);
    r.params = std::move(tr.params);
    r.test_metrics = eval_toy_classifier(r.params, r.cfg, test_set, n_classes);
    return r;
}

ClassifierMetrics eval_toy_classifier(const ModelParams<float>& params, const RtnConfig& cfg,
                                      const std::vector<TrainSample>& test_set,
                                      int n_classes) {
    std::vector<int> pred, truth;
    pred.reserve(test_set.size());
    truth.reserve(test_set.size());
    for (const TrainSample& s : test_set) {
        pred.push_back(argmax_class(rtn_forward(s.cloud, params, cfg)));
        truth.push_back(s.label);
    }
    return classifier_metrics(pred, truth, n_classes);
}

std::vector<RdfTrendRow> rdf_trend_experiment(const std::vector<std::uint64_t>& seeds,
                                              const RdfTrendOptions& opt) {
    std::vector<RdfTrendRow> rows;
    const int n_classes = static_cast<int>(opt.families.size());
    for (const std::uint64_t seed : seeds) {
        for (const RdfMode mode : {RdfMode::SO0, RdfMode::SO1, RdfMode::SO3}) {
            // train and test within the same mode; test shapes are extra
            // per-family indices, so source shapes never leak
            const int total = opt.per_family + opt.test_per_family;
            const std::vector<RdfSample> all =
                build_rdf_dataset(opt.families, total, opt.n_points, mode, seed);
            std::vector<TrainSample> train_set, test_set;
            for (const RdfSample& s : all) {
                const int within = s.source_cloud_id % total;
                TrainSample t{s.cloud, s.family_label};
                (within < opt.per_family ? train_set : test_set).push_back(std::move(t));
            }
            ToyResult r = train_toy_classifier(train_set, test_set, n_classes, opt.epochs,
                                               mix_seed(seed, static_cast<std::uint64_t>(mode)));
            rows.push_back({mode, seed, r.test_metrics.ins, r.test_metrics.mcls});
        }
    }
    return rows;
}

std::pair<double, double> pipeline_experiment(const Predictor& rtn_pred,
                                              const DiscretizationGrid& grid,
                                              const ModelParams<float>& toy_params,
                                              const RtnConfig& toy_cfg,
                                              const std::vector<LabeledSample>& so3_test,
                                              const std::vector<int>& family_labels,
                                              int n_classes) {
    if (so3_test.size() != family_labels.size() || so3_test.empty()) {
        throw std::invalid_argument("pipeline_experiment: bad inputs");
    }
    std::vector<int> pred_raw, pred_rtn;
    for (size_t i = 0; i < so3_test.size(); ++i) {
        const LabeledSample& s = so3_test[i];
        pred_raw.push_back(argmax_class(rtn_forward(s.cloud, toy_params, toy_cfg)));
        const ClassId c = predict(rtn_pred, s);
        const PointCloud restored = apply_rotation(inverse(grid.class_to_matrix(c)), s.cloud);
        pred_rtn.push_back(argmax_class(rtn_forward(restored, toy_params, toy_cfg)));
    }
    const ClassifierMetrics with_rtn = classifier_metrics(pred_rtn, family_labels, n_classes);
    const ClassifierMetrics without_rtn = classifier_metrics(pred_raw, family_labels, n_classes);
    return {with_rtn.ins, without_rtn.ins};
}

}  // namespace rtn

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rtn/net.hpp"
#include "rtn/synth.hpp"

namespace rtn {

struct EvalReport {
    double top1 = 0.0;
    double top5 = 0.0;
    double mean_incd = 0.0;
    double mean_outcd = 0.0;
    std::vector<std::pair<int, double>> per_class_accuracy;  // classes seen in the test set
    int n_samples = 0;
    std::uint64_t seed = 0;
    std::string config_digest;

    // pretty-printed, stable key order
    std::string to_json() const;
};

std::string config_digest(const RtnConfig& cfg);

// A predictor is either the trained model or the oracle stub (always
// returns the true label); the stub exercises the metric plumbing
// independently of training quality.
struct Predictor {
    const ModelParams<float>* params = nullptr;
    const RtnConfig* cfg = nullptr;
    bool oracle = false;

    static Predictor model(const ModelParams<float>& p, const RtnConfig& c) {
        return {&p, &c, false};
    }
    static Predictor oracle_stub() { return {nullptr, nullptr, true}; }
};

std::pair<double, double> rotation_accuracy(const Predictor& pred,
                                            const std::vector<LabeledSample>& samples,
                                            int n_classes);

// inCD = mean CD(rotated, aligned); outCD = mean CD(un-rotated by the
// predicted class, aligned). Samples must reference sources present in ds.
std::pair<double, double> mean_in_out_cd(const Predictor& pred,
                                         const DiscretizationGrid& grid,
                                         const RotationDataset& ds,
                                         const std::vector<int>& sample_indices);

EvalReport evaluate(const Predictor& pred, const DiscretizationGrid& grid,
                    const RotationDataset& ds, const std::vector<int>& sample_indices,
                    std::uint64_t seed);

// Instance accuracy and unweighted mean per-class accuracy.
struct ClassifierMetrics {
    double ins = 0.0;
    double mcls = 0.0;
    std::vector<double> per_class;
};

ClassifierMetrics classifier_metrics(const std::vector<int>& predicted,
                                     const std::vector<int>& truth, int n_classes);

// Mini point-wise-MLP + max-pool + FC shape classifier (stand-in for the
// full-scale backbones); reuses the GA engine with out_classes set.
RtnConfig toy_classifier_config(int n_points, int n_classes, std::uint64_t seed);

struct ToyResult {
    ModelParams<float> params;
    RtnConfig cfg;
    ClassifierMetrics test_metrics;
};

ToyResult train_toy_classifier(const std::vector<TrainSample>& train_set,
                               const std::vector<TrainSample>& test_set, int n_classes,
                               int epochs, std::uint64_t seed);

ClassifierMetrics eval_toy_classifier(const ModelParams<float>& params,
                                      const RtnConfig& cfg,
                                      const std::vector<TrainSample>& test_set,
                                      int n_classes);

struct RdfTrendRow {
    RdfMode mode;
    std::uint64_t seed;
    double ins;
    double mcls;
};

struct RdfTrendOptions {
    std::vector<std::string> families = kShapeFamilies;
    int per_family = 24;
    int test_per_family = 8;
    int n_points = 256;
    int epochs = 60;
};

// Trains and tests the toy classifier within each of SO0/SO1/SO3, per seed.
// Identical seeds reuse identical underlying shapes across modes.
std::vector<RdfTrendRow> rdf_trend_experiment(const std::vector<std::uint64_t>& seeds,
                                              const RdfTrendOptions& opt);

// Toy classifier trained on SO0, evaluated on a rotated test set directly
// vs. after RTN pose normalization. family_labels runs parallel to so3_test.
std::pair<double, double> pipeline_experiment(const Predictor& rtn_pred,
                                              const DiscretizationGrid& grid,
                                              const ModelParams<float>& toy_params,
                                              const RtnConfig& toy_cfg,
                                              const std::vector<LabeledSample>& so3_test,
                                              const std::vector<int>& family_labels,
                                              int n_classes);

}  // namespace rtn

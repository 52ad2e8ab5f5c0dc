// Command-line surface: dataset synthesis, codec utilities, training,
// evaluation, pose normalization and verification commands.
//
// Exit codes: 0 success, 1 domain/runtime error, 2 usage error.
// Machine-readable output goes to stdout as JSON; logs go to stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rtn/checkpoint.hpp"
#include "rtn/eval.hpp"
#include "rtn/grid.hpp"
#include "rtn/net.hpp"
#include "rtn/synth.hpp"

namespace {

using nlohmann::ordered_json;

void log_resolved(const std::string& cmd, const ordered_json& flags) {
    std::cerr << "[rtn] " << cmd << " " << flags.dump() << "\n";
}

std::vector<std::string> parse_families(const std::string& csv) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= csv.size()) {
        const size_t comma = csv.find(',', start);
        const std::string f = csv.substr(start, comma - start);
        if (!f.empty()) {
            if (!rtn::is_shape_family(f)) {
                throw std::invalid_argument("unknown shape family '" + f + "'");
            }
            out.push_back(f);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("no shape families given");
    return out;
}

// the finite-difference verification profile: 16 points, widths [8,8], k=3
rtn::RtnConfig gradcheck_profile() {
    rtn::RtnConfig cfg;
    cfg.grid_k = 3;
    cfg.m_keypoints = 8;
    cfg.knn_k = 4;
    cfg.global_mlp_widths = {8, 8};
    cfg.global_fc_width = 8;
    cfg.edgeconv_widths = {8, 8};
    cfg.aggregate_width = 8;
    cfg.local_fc_width = 8;
    cfg.head_widths = {8};
    return cfg;
}

rtn::RtnConfig profile_config(const std::string& profile, int grid_k) {
    if (profile == "tiny") {
        rtn::RtnConfig cfg = rtn::tiny_config();
        cfg.grid_k = grid_k;
        return cfg;
    }
    if (profile == "small") return rtn::small_config(grid_k);
    if (profile == "gradcheck") {
        rtn::RtnConfig cfg = gradcheck_profile();
        cfg.grid_k = grid_k;
        return cfg;
    }
    throw std::invalid_argument("unknown profile '" + profile + "'");
}

template <typename T>
double gradcheck_max_rel_error(const rtn::RtnConfig& cfg, std::uint64_t seed) {
    const rtn::PointCloud cloud = rtn::make_shape("box", 16, seed);
    rtn::RtnConfig c = cfg;
    c.seed = seed;
    rtn::ModelParams<T> params = rtn::init_params<T>(c);
    // perturb the zero head so the loss surface is not flat in every layer
    rtn::Rng rng(rtn::mix_seed(seed, 0x6cadULL));
    for (T& v : params.at("head.out.w").data) {
        v = static_cast<T>(rng.uniform(-0.05, 0.05));
    }
    const rtn::RtnInput<T> in = rtn::prepare_input<T>(cloud, c);
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(c.n_outputs())));
    const rtn::ModelParams<T> grads = rtn::rtn_backward(in, params, c, label);
    // the wide step would drown in float roundoff; the narrow one keeps the
    // odds of straddling a LeakyReLU/max-pool kink negligible in double mode
    const double eps = sizeof(T) == sizeof(double) ? 1e-6 : 1e-3;
    double worst = 0.0;
    for (size_t t = 0; t < params.tensors.size(); ++t) {
        for (size_t i = 0; i < params.tensors[t].data.size(); ++i) {
            T& v = params.tensors[t].data[i];
            const T orig = v;
            v = orig + static_cast<T>(eps);
            const double up = rtn::cross_entropy(rtn::rtn_forward(in, params, c), label);
            v = orig - static_cast<T>(eps);
            const double dn = rtn::cross_entropy(rtn::rtn_forward(in, params, c), label);
            v = orig;
            const double fd = (up - dn) / (2.0 * eps);
            const double an = grads.tensors[t].data[i];
            const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

struct SplitSamples {
    std::vector<rtn::TrainSample> train, test;
    std::vector<int> train_idx, test_idx;
};

SplitSamples split_dataset(const rtn::RotationDataset& ds, double test_fraction,
                           std::uint64_t seed) {
    SplitSamples s;
    if (test_fraction <= 0.0) {
        for (size_t i = 0; i < ds.samples.size(); ++i) {
            s.train.push_back({ds.samples[i].cloud, ds.samples[i].label,
                               ds.samples[i].truth_rotation, true});
            s.train_idx.push_back(static_cast<int>(i));
        }
        return s;
    }
    rtn::split_by_source(ds, test_fraction, seed, &s.train_idx, &s.test_idx);
    for (int i : s.train_idx) {
        s.train.push_back({ds.samples[static_cast<size_t>(i)].cloud,
                           ds.samples[static_cast<size_t>(i)].label,
                           ds.samples[static_cast<size_t>(i)].truth_rotation, true});
    }
    for (int i : s.test_idx) {
        s.test.push_back({ds.samples[static_cast<size_t>(i)].cloud,
                          ds.samples[static_cast<size_t>(i)].label});
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rtn: view-invariant pose normalization for 3D point clouds"};
    app.require_subcommand(1);
    int jobs = 1;
    app.add_option("--jobs", jobs, "worker cap; 1 guarantees bit-exact determinism")
        ->check(CLI::PositiveNumber);

    // --- codec -------------------------------------------------------------
    CLI::App* codec = app.add_subcommand("codec", "SO(3) discretization utilities");
    codec->require_subcommand(1);
    int k = 6;
    double alpha = 0.0, beta = 0.0, gamma = 0.0;
    int class_id = 0;

    CLI::App* codec_info = codec->add_subcommand("info", "grid counts for --k");
    codec_info->add_option("--k", k, "theta = pi/k")->required()->check(CLI::Range(2, 10000));

    CLI::App* codec_quantize = codec->add_subcommand("quantize", "euler angles -> class id");
    codec_quantize->add_option("--k", k)->required()->check(CLI::Range(2, 10000));
    codec_quantize->add_option("--alpha", alpha)->required();
    codec_quantize->add_option("--beta", beta)->required();
    codec_quantize->add_option("--gamma", gamma)->required();

    CLI::App* codec_declass = codec->add_subcommand("declass", "class id -> representative");
    codec_declass->add_option("--k", k)->required()->check(CLI::Range(2, 10000));
    codec_declass->add_option("--id", class_id)->required();

    // --- synth ---------------------------------------------------------------
    CLI::App* synth = app.add_subcommand("synth", "write canonical-pose shape clouds");
    std::string families_csv = "box,cylinder,cone,ellipsoid,lbracket,pyramid,cross,tube";
    int per_family = 4, n_points = 256;
    std::uint64_t seed = 0;
    std::string out_dir;
    synth->add_option("--families", families_csv, "comma-separated family names");
    synth->add_option("--per-family", per_family)->check(CLI::PositiveNumber);
    synth->add_option("--points", n_points)->check(CLI::PositiveNumber);
    synth->add_option("--seed", seed);
    synth->add_option("--out", out_dir, "output directory")->required();

    // --- dataset ---------------------------------------------------------------
    CLI::App* dataset = app.add_subcommand("dataset", "build a labeled dataset + manifest");
    std::string mode = "rotlabel";
    int per_shape = 4;
    double jitter = 0.0;
    dataset->add_option("--mode", mode, "rotlabel | so0 | so1 | so3")
        ->check(CLI::IsMember({"rotlabel", "so0", "so1", "so3"}));
    dataset->add_option("--k", k, "grid theta = pi/k (rotlabel mode)")->check(CLI::Range(2, 10000));
    dataset->add_option("--families", families_csv);
    dataset->add_option("--per-family", per_family)->check(CLI::PositiveNumber);
    dataset->add_option("--per-shape", per_shape, "rotations per shape (rotlabel mode)")
        ->check(CLI::PositiveNumber);
    dataset->add_option("--points", n_points)->check(CLI::PositiveNumber);
    dataset->add_option("--jitter", jitter, "gaussian sigma after rotation")
        ->check(CLI::NonNegativeNumber);
    std::string rotation_mode = "haar-quantized";
    dataset->add_option("--rotations", rotation_mode, "haar-quantized | grid-exact")
        ->check(CLI::IsMember({"haar-quantized", "grid-exact"}));
    dataset->add_option("--seed", seed);
    dataset->add_option("--out", out_dir)->required();

    // --- train ---------------------------------------------------------------
    CLI::App* train_cmd = app.add_subcommand("train", "train the rotation classifier");
    std::string manifest_path, model_path, log_path, profile = "small", backbone = "GLA";
    int epochs = 50, batch = 16;
    double lr = 1e-3, val_fraction = 0.125;
    train_cmd->add_option("--manifest", manifest_path)->required();
    train_cmd->add_option("--out", model_path, "checkpoint path")->required();
    train_cmd->add_option("--log", log_path, "epoch log CSV path");
    train_cmd->add_option("--profile", profile, "tiny | small | gradcheck");
    train_cmd->add_option("--backbone", backbone, "GA | LA | GLA");
    train_cmd->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch", batch)->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", lr)->check(CLI::PositiveNumber);
    train_cmd->add_option("--val-fraction", val_fraction,
                          "held-out source fraction (0 disables)")
        ->check(CLI::Range(0.0, 0.9));
    double aug_jitter = 0.0;
    bool aug_rotations = false;
    train_cmd->add_option("--aug-jitter", aug_jitter, "train-time gaussian coordinate noise")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_flag("--aug-rotations", aug_rotations,
                        "compose samples with random grid rotations (relabeled)");
    train_cmd->add_option("--seed", seed);

    // --- eval ---------------------------------------------------------------
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a model on a manifest");
    bool oracle = false;
    double test_fraction = 0.0;
    eval_cmd->add_option("--manifest", manifest_path)->required();
    eval_cmd->add_option("--model", model_path, "checkpoint path");
    eval_cmd->add_flag("--oracle-stub", oracle, "score the true-label stub instead");
    eval_cmd->add_option("--test-fraction", test_fraction,
                         "evaluate only this held-out source fraction (0 = all)")
        ->check(CLI::Range(0.0, 0.9));
    eval_cmd->add_option("--split-seed", seed, "seed of the train/test source split");

    // --- normalize ---------------------------------------------------------------
    CLI::App* normalize = app.add_subcommand("normalize", "un-rotate a cloud to canonical view");
    std::string in_path, out_path;
    normalize->add_option("--model", model_path)->required();
    normalize->add_option("--in", in_path)->required();
    normalize->add_option("--out", out_path)->required();

    // --- gradcheck ---------------------------------------------------------------
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    std::string gc_profile = "tiny";
    bool double_mode = false;
    gradcheck->add_option("--profile", gc_profile, "tiny (the 16-point verification profile)")
        ->check(CLI::IsMember({"tiny"}));
    gradcheck->add_option("--seed", seed);
    gradcheck->add_flag("--double", double_mode, "double-precision verification mode");

    // --- cd ---------------------------------------------------------------
    CLI::App* cd_cmd = app.add_subcommand("cd", "Chamfer distance between two clouds");
    std::string path_a, path_b;
    cd_cmd->add_option("--a", path_a)->required();
    cd_cmd->add_option("--b", path_b)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*codec_info) {
            log_resolved("codec info", {{"k", k}});
            const rtn::DiscretizationGrid g = rtn::DiscretizationGrid::from_k(k);
            std::cout << g.describe_json() << "\n";
        } else if (*codec_quantize) {
            log_resolved("codec quantize",
                         {{"k", k}, {"alpha", alpha}, {"beta", beta}, {"gamma", gamma}});
            const rtn::DiscretizationGrid g = rtn::DiscretizationGrid::from_k(k);
            std::cout << g.quantize(rtn::EulerZYZ{alpha, beta, gamma}) << "\n";
        } else if (*codec_declass) {
            log_resolved("codec declass", {{"k", k}, {"id", class_id}});
            const rtn::DiscretizationGrid g = rtn::DiscretizationGrid::from_k(k);
            const rtn::EulerZYZ e = g.class_to_euler(class_id);
            ordered_json j;
            j["id"] = class_id;
            j["alpha"] = e.alpha;
            j["beta"] = e.beta;
            j["gamma"] = e.gamma;
            std::cout << j.dump(2) << "\n";
        } else if (*synth) {
            const std::vector<std::string> families = parse_families(families_csv);
            log_resolved("synth", {{"families", families},
                                   {"per_family", per_family},
                                   {"points", n_points},
                                   {"seed", seed},
                                   {"out", out_dir}});
            std::filesystem::create_directories(out_dir);
            int written = 0;
            for (size_t f = 0; f < families.size(); ++f) {
                for (int i = 0; i < per_family; ++i) {
                    const rtn::PointCloud c = rtn::make_shape(
                        families[f], n_points, rtn::mix_seed(seed, f, static_cast<std::uint64_t>(i)));
                    char name[64];
                    std::snprintf(name, sizeof(name), "%s_%03d.xyz", families[f].c_str(), i);
                    rtn::write_cloud(c, (std::filesystem::path(out_dir) / name).string());
                    ++written;
                }
            }
            std::cout << ordered_json{{"clouds_written", written}}.dump() << "\n";
        } else if (*dataset) {
            const std::vector<std::string> families = parse_families(families_csv);
            log_resolved("dataset", {{"mode", mode},
                                     {"k", k},
                                     {"families", families},
                                     {"per_family", per_family},
                                     {"per_shape", per_shape},
                                     {"points", n_points},
                                     {"jitter", jitter},
                                     {"rotations", rotation_mode},
                                     {"seed", seed},
                                     {"out", out_dir}});
            std::filesystem::create_directories(out_dir);
            if (mode == "rotlabel") {
                const rtn::DiscretizationGrid g = rtn::DiscretizationGrid::from_k(k);
                const rtn::RotationDataset ds = rtn::build_rotation_dataset(
                    families, per_family, per_shape, n_points, g,
                    rtn::rotation_mode_from_name(rotation_mode), jitter, seed);
                const std::string manifest = rtn::write_manifest(ds, out_dir);
                std::cout << ordered_json{{"manifest", manifest},
                                          {"samples", ds.samples.size()},
                                          {"sources", ds.sources.size()}}
                                 .dump()
                          << "\n";
            } else {
                const std::vector<rtn::RdfSample> samples = rtn::build_rdf_dataset(
                    families, per_family, n_points, rtn::rdf_mode_from_name(mode), seed);
                const std::string list_path =
                    (std::filesystem::path(out_dir) / "rdf_samples.jsonl").string();
                std::ofstream out(list_path, std::ios::binary);
                if (!out) throw std::runtime_error("cannot open " + list_path);
                for (size_t i = 0; i < samples.size(); ++i) {
                    char name[64];
                    std::snprintf(name, sizeof(name), "sample_%05zu.xyz", i);
                    rtn::write_cloud(samples[i].cloud,
                                     (std::filesystem::path(out_dir) / name).string());
                    ordered_json j;
                    j["cloud_path"] = name;
                    j["family_label"] = samples[i].family_label;
                    j["family"] = families[static_cast<size_t>(samples[i].family_label)];
                    j["source_id"] = samples[i].source_cloud_id;
                    j["mode"] = mode;
                    out << j.dump() << "\n";
                }
                std::cout << ordered_json{{"list", list_path}, {"samples", samples.size()}}.dump()
                          << "\n";
            }
        } else if (*train_cmd) {
            const rtn::RotationDataset ds = rtn::read_manifest(manifest_path);
            rtn::RtnConfig cfg = profile_config(profile, ds.grid_k);
            cfg.backbone = rtn::backbone_from_name(backbone);
            cfg.seed = seed;
            log_resolved("train", {{"manifest", manifest_path},
                                   {"profile", profile},
                                   {"backbone", backbone},
                                   {"grid_k", ds.grid_k},
                                   {"epochs", epochs},
                                   {"batch", batch},
                                   {"lr", lr},
                                   {"val_fraction", val_fraction},
                                   {"aug_jitter", aug_jitter},
                                   {"aug_rotations", aug_rotations},
                                   {"seed", seed},
                                   {"out", model_path}});
            const SplitSamples split = split_dataset(ds, val_fraction, seed);
            rtn::TrainOptions opt;
            opt.epochs = epochs;
            opt.batch = batch;
            opt.lr = lr;
            opt.aug_jitter = aug_jitter;
            opt.aug_rotations = aug_rotations;
            const rtn::TrainResult r = rtn::train(split.train, split.test, cfg, opt);
            rtn::save_checkpoint(r.params, cfg, model_path);
            if (!log_path.empty()) {
                std::ofstream log(log_path, std::ios::binary);
                if (!log) throw std::runtime_error("cannot open " + log_path);
                log << "epoch,loss,val_top1\n";
                char row[128];
                for (const rtn::EpochLog& e : r.log) {
                    std::snprintf(row, sizeof(row), "%d,%.17g,%.17g\n", e.epoch, e.loss,
                                  e.val_top1);
                    log << row;
                }
            }
            ordered_json j;
            j["checkpoint"] = model_path;
            j["train_samples"] = split.train.size();
            j["val_samples"] = split.test.size();
            j["final_loss"] = r.log.back().loss;
            j["final_val_top1"] = r.log.back().val_top1;
            std::cout << j.dump(2) << "\n";
        } else if (*eval_cmd) {
            if (oracle != model_path.empty()) {
                throw std::invalid_argument("eval: pass exactly one of --model, --oracle-stub");
            }
            log_resolved("eval", {{"manifest", manifest_path},
                                  {"model", model_path},
                                  {"oracle_stub", oracle},
                                  {"test_fraction", test_fraction},
                                  {"split_seed", seed}});
            const rtn::RotationDataset ds = rtn::read_manifest(manifest_path);
            const rtn::DiscretizationGrid grid = rtn::DiscretizationGrid::from_k(ds.grid_k);
            const SplitSamples split = split_dataset(ds, test_fraction, seed);
            const std::vector<int>& idx =
                test_fraction > 0.0 ? split.test_idx : split.train_idx;
            rtn::ModelParams<float> params;
            rtn::RtnConfig cfg;
            rtn::Predictor pred = rtn::Predictor::oracle_stub();
            if (!oracle) {
                std::tie(params, cfg) = rtn::load_checkpoint(model_path);
                if (cfg.out_classes == 0 && cfg.grid_k != ds.grid_k) {
                    throw std::runtime_error("eval: model grid k=" + std::to_string(cfg.grid_k) +
                                             " does not match manifest k=" +
                                             std::to_string(ds.grid_k));
                }
                pred = rtn::Predictor::model(params, cfg);
            }
            const rtn::EvalReport rep = rtn::evaluate(pred, grid, ds, idx, seed);
            std::cout << rep.to_json() << "\n";
        } else if (*normalize) {
            log_resolved("normalize",
                         {{"model", model_path}, {"in", in_path}, {"out", out_path}});
            const auto [params, cfg] = rtn::load_checkpoint(model_path);
            const rtn::DiscretizationGrid grid = rtn::DiscretizationGrid::from_k(cfg.grid_k);
            const rtn::PointCloud cloud = rtn::read_cloud(in_path);
            const auto [normalized, cls] = rtn::normalize_pose(cloud, params, cfg, grid);
            rtn::write_cloud(normalized, out_path);
            std::cout << ordered_json{{"predicted_class", cls}, {"out", out_path}}.dump() << "\n";
        } else if (*gradcheck) {
            log_resolved("gradcheck",
                         {{"profile", gc_profile}, {"seed", seed}, {"double", double_mode}});
            const rtn::RtnConfig cfg = gradcheck_profile();
            const double tol = double_mode ? 1e-5 : 1e-2;
            const double err = double_mode ? gradcheck_max_rel_error<double>(cfg, seed)
                                           : gradcheck_max_rel_error<float>(cfg, seed);
            ordered_json j;
            j["max_rel_error"] = err;
            j["tolerance"] = tol;
            j["pass"] = err < tol;
            std::cout << j.dump(2) << "\n";
            return err < tol ? 0 : 1;
        } else if (*cd_cmd) {
            log_resolved("cd", {{"a", path_a}, {"b", path_b}});
            const rtn::PointCloud a = rtn::read_cloud(path_a);
            const rtn::PointCloud b = rtn::read_cloud(path_b);
            std::cout << rtn::chamfer_distance(a, b) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "[rtn] error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

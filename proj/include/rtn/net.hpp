#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtn/cloud.hpp"
#include "rtn/grid.hpp"

namespace rtn {

enum class Backbone { GA, LA, GLA };

std::string backbone_name(Backbone b);
Backbone backbone_from_name(const std::string& s);

// Architecture hyperparameters of the rotation classifier. out_classes = 0
// means "the grid's class count"; a nonzero value overrides it (used by the
// toy shape classifier, which reuses the same engine).
struct RtnConfig {
    int grid_k = 6;
    Backbone backbone = Backbone::GLA;
    int m_keypoints = 64;
    int knn_k = 16;
    std::vector<int> global_mlp_widths = {64, 128, 256};
    int global_fc_width = 256;
    std::vector<int> edgeconv_widths = {64, 64, 128, 256};
    int aggregate_width = 512;
    int local_fc_width = 256;
    std::vector<int> head_widths = {256, 128};
    float leaky_slope = 0.2f;
    std::uint64_t seed = 0;
    int out_classes = 0;

    bool has_global() const { return backbone != Backbone::LA; }
    bool has_local() const { return backbone != Backbone::GA; }
    int n_outputs() const {
        if (out_classes > 0) return out_classes;
        const int k = grid_k;
        return 2 * k * ((k - 1) * 2 * k + 2);
    }
};

// CI-speed profile (grid k=3, N=84).
RtnConfig tiny_config();
// Profile used for the desk-scale training runs.
RtnConfig small_config(int grid_k);

template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        data.assign(n, T(0));
    }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
};

template <typename T>
struct ModelParams {
    std::vector<std::string> names;   // canonical checkpoint order
    std::vector<Tensor<T>> tensors;

    Tensor<T>& at(const std::string& name) {
        for (size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return tensors[i];
        }
        throw std::out_of_range("no parameter named '" + name + "'");
    }
    const Tensor<T>& at(const std::string& name) const {
        return const_cast<ModelParams*>(this)->at(name);
    }
};

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
};

// Canonical parameter table: every linear layer contributes <name>.w [out,in]
// and <name>.b [out], in declaration order (global branch, local branch, head).
std::vector<ParamSpec> param_specs(const RtnConfig& cfg);

// Glorot-uniform weights, zero biases, zero final head layer (so an untrained
// model emits uniform logits). Seeded by cfg.seed.
template <typename T>
ModelParams<T> init_params(const RtnConfig& cfg);

template <typename U, typename T>
ModelParams<U> cast_params(const ModelParams<T>& p) {
    ModelParams<U> out;
    out.names = p.names;
    out.tensors.reserve(p.tensors.size());
    for (const Tensor<T>& t : p.tensors) {
        Tensor<U> u;
        u.shape = t.shape;
        u.data.assign(t.data.begin(), t.data.end());
        out.tensors.push_back(std::move(u));
    }
    return out;
}

// Per-point affine map + LeakyReLU, weights shared across points.
// x [n, ci], w [co, ci], b [co] -> [n, co]
template <typename T>
Tensor<T> pointwise_mlp_forward(const Tensor<T>& x, const Tensor<T>& w,
                                const Tensor<T>& b, T slope);

// EdgeConv: out_i = max over neighbors j of lrelu(W [x_i, x_j - x_i] + b),
// channelwise. x [n, ci], w [co, 2*ci], b [co] -> [n, co]
template <typename T>
Tensor<T> edgeconv_forward(const Tensor<T>& x, const NeighborTable& nbrs,
                           const Tensor<T>& w, const Tensor<T>& b, T slope);

// Cloud preprocessed for the network: coordinates plus the sampling/graph
// structure, computed once in double precision so both engines agree.
template <typename T>
struct RtnInput {
    int n_points = 0;
    std::vector<T> coords;        // [n, 3] row-major
    std::vector<int> keypoints;   // FPS indices (global branch)
    NeighborTable nbrs;           // kNN graph (local branch)
};

template <typename T>
RtnInput<T> prepare_input(const PointCloud& cloud, const RtnConfig& cfg);

template <typename T>
std::vector<T> rtn_forward(const RtnInput<T>& in, const ModelParams<T>& params,
                           const RtnConfig& cfg);

std::vector<float> rtn_forward(const PointCloud& cloud, const ModelParams<float>& params,
                               const RtnConfig& cfg);

// loss = -log softmax(logits)[label], max-shift stabilized.
// dlogits (optional) receives softmax - one_hot.
template <typename T>
T cross_entropy(const std::vector<T>& logits, int label, std::vector<T>* dlogits = nullptr);

// Analytic gradient of cross_entropy w.r.t. every parameter tensor
// (same names/shapes as params). Max-pools route to the smallest-index
// argmax on ties.
template <typename T>
ModelParams<T> rtn_backward(const RtnInput<T>& in, const ModelParams<T>& params,
                            const RtnConfig& cfg, int label, T* loss_out = nullptr);

int argmax_class(const std::vector<float>& logits);  // ties -> smaller id

// Predicts the rotation class and applies the inverse class rotation.
std::pair<PointCloud, ClassId> normalize_pose(const PointCloud& cloud,
                                              const ModelParams<float>& params,
                                              const RtnConfig& cfg,
                                              const DiscretizationGrid& grid);

struct TrainSample {
    PointCloud cloud;
    int label = 0;
    // exact rotation behind the label; enables rotation augmentation
    Mat3 truth_rotation = Mat3::Identity();
    bool has_rotation = false;
};

struct TrainOptions {
    double lr = 1e-3;
    int batch = 16;
    int epochs = 10;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double aug_jitter = 0.0;  // gaussian coordinate noise per epoch (train only)
    // compose each training sample with a random exact grid rotation; the new
    // label is quantize(g * truth). Needs TrainSample.has_rotation and a
    // grid-classifying head (out_classes == 0). FPS/kNN graphs are rotation
    // invariant, so the precomputed structures stay valid.
    bool aug_rotations = false;
};

struct EpochLog {
    int epoch;        // 0 = before any update
    double loss;      // mean cross-entropy over the training set / epoch
    double val_top1;  // held-out top-1 (nan if no validation set)
};

struct TrainResult {
    ModelParams<float> params;
    std::vector<EpochLog> log;
};

// Adam, batch-averaged gradients, fixed shuffle per (cfg.seed, epoch).
// Single-threaded and fully deterministic per seed.
TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set, const RtnConfig& cfg,
                  const TrainOptions& opt);

// ---------------------------------------------------------------------------
// template implementation

namespace detail {

template <typename T>
inline T lrelu(T v, T slope) {
    return v > T(0) ? v : slope * v;
}

// derivative of LeakyReLU recovered from the output sign
template <typename T>
inline T lrelu_grad_from_out(T out, T slope) {
    return out > T(0) ? T(1) : slope;
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// y[r, co] = act(x[r, :] . w[co, :] + b[co])
template <typename T>
void linear_rows(const T* x, int r, int ci, const T* w, const T* b, int co, T slope,
                 bool act, T* y) {
    Eigen::Map<const RowMat<T>> xm(x, r, ci);
    Eigen::Map<const RowMat<T>> wm(w, co, ci);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bm(b, co);
    Eigen::Map<RowMat<T>> ym(y, r, co);
    ym.noalias() = xm * wm.transpose();
    ym.rowwise() += bm.transpose();
    if (act) {
        for (int i = 0; i < r; ++i) {
            T* yi = y + static_cast<size_t>(i) * co;
            for (int o = 0; o < co; ++o) yi[o] = lrelu(yi[o], slope);
        }
    }
}

// backward through linear_rows: given dy (already multiplied by the
// activation derivative when act was used), accumulate dw, db, dx.
template <typename T>
void linear_rows_backward(const T* x, int r, int ci, const T* w, int co, const T* dy,
                          T* dw, T* db, T* dx) {
    for (int i = 0; i < r; ++i) {
        const T* xi = x + static_cast<size_t>(i) * ci;
        const T* dyi = dy + static_cast<size_t>(i) * co;
        T* dxi = dx ? dx + static_cast<size_t>(i) * ci : nullptr;
        for (int o = 0; o < co; ++o) {
            const T g = dyi[o];
            if (g == T(0)) continue;
            const T* wo = w + static_cast<size_t>(o) * ci;
            T* dwo = dw + static_cast<size_t>(o) * ci;
            db[o] += g;
            for (int c = 0; c < ci; ++c) {
                dwo[c] += g * xi[c];
                if (dxi) dxi[c] += g * wo[c];
            }
        }
    }
}

// channelwise max over rows; argmax ties -> smallest row index
template <typename T>
void maxpool_rows(const T* x, int r, int c, T* out, int* arg) {
    for (int ch = 0; ch < c; ++ch) {
        T best = x[ch];
        int bi = 0;
        for (int i = 1; i < r; ++i) {
            const T v = x[static_cast<size_t>(i) * c + ch];
            if (v > best) {
                best = v;
                bi = i;
            }
        }
        out[ch] = best;
        arg[ch] = bi;
    }
}

}  // namespace detail

template <typename T>
Tensor<T> pointwise_mlp_forward(const Tensor<T>& x, const Tensor<T>& w,
                                const Tensor<T>& b, T slope) {
    if (x.cols() != w.cols() || w.rows() != b.rows()) {
        throw std::invalid_argument("pointwise_mlp_forward: shape mismatch");
    }
    Tensor<T> y({x.rows(), w.rows()});
    detail::linear_rows(x.data.data(), x.rows(), x.cols(), w.data.data(), b.data.data(),
                        w.rows(), slope, true, y.data.data());
    return y;
}

namespace detail {

// EdgeConv forward keeping the per-(point, channel) argmax neighbor slot for
// the backward pass. x [n, ci], w [co, 2ci].
template <typename T>
void edgeconv_core(const T* x, int n, int ci, const NeighborTable& nbrs, const T* w,
                   const T* b, int co, T slope, T* out, int* arg_slot) {
    const int twoci = 2 * ci;
    // one GEMM over all edges, then a channelwise max per point
    size_t total = 0;
    for (int i = 0; i < n; ++i) {
        if (nbrs.indices[static_cast<size_t>(i)].empty()) {
            throw std::invalid_argument("edgeconv: empty neighbor row");
        }
        total += nbrs.indices[static_cast<size_t>(i)].size();
    }
    RowMat<T> edges(static_cast<Eigen::Index>(total), twoci);
    size_t e = 0;
    for (int i = 0; i < n; ++i) {
        const T* xi = x + static_cast<size_t>(i) * ci;
        for (int j : nbrs.indices[static_cast<size_t>(i)]) {
            const T* xj = x + static_cast<size_t>(j) * ci;
            T* row = edges.data() + e * static_cast<size_t>(twoci);
            for (int c = 0; c < ci; ++c) {
                row[c] = xi[c];
                row[ci + c] = xj[c] - xi[c];
            }
            ++e;
        }
    }
    Eigen::Map<const RowMat<T>> wm(w, co, twoci);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bm(b, co);
    RowMat<T> acts(static_cast<Eigen::Index>(total), co);
    acts.noalias() = edges * wm.transpose();
    acts.rowwise() += bm.transpose();
    e = 0;
    for (int i = 0; i < n; ++i) {
        const size_t k = nbrs.indices[static_cast<size_t>(i)].size();
        T* oi = out + static_cast<size_t>(i) * co;
        int* ai = arg_slot ? arg_slot + static_cast<size_t>(i) * co : nullptr;
        for (size_t slot = 0; slot < k; ++slot) {
            const T* row = acts.data() + (e + slot) * static_cast<size_t>(co);
            for (int o = 0; o < co; ++o) {
                const T v = lrelu(row[o], slope);
                if (slot == 0 || v > oi[o]) {
                    oi[o] = v;
                    if (ai) ai[o] = static_cast<int>(slot);
                }
            }
        }
        e += k;
    }
}

template <typename T>
void edgeconv_backward(const T* x, int n, int ci, const NeighborTable& nbrs, const T* w,
                       int co, T slope, const T* out, const int* arg_slot, const T* dout,
                       T* dw, T* db, T* dx) {
    const int twoci = 2 * ci;
    for (int i = 0; i < n; ++i) {
        const auto& row = nbrs.indices[static_cast<size_t>(i)];
        const T* oi = out + static_cast<size_t>(i) * co;
        const int* ai = arg_slot + static_cast<size_t>(i) * co;
        const T* di = dout + static_cast<size_t>(i) * co;
        const T* xi = x + static_cast<size_t>(i) * ci;
        T* dxi = dx ? dx + static_cast<size_t>(i) * ci : nullptr;
        for (int o = 0; o < co; ++o) {
            const T g0 = di[o];
            if (g0 == T(0)) continue;
            const int j = row[static_cast<size_t>(ai[o])];
            const T* xj = x + static_cast<size_t>(j) * ci;
            const T g = g0 * lrelu_grad_from_out(oi[o], slope);
            const T* wo = w + static_cast<size_t>(o) * twoci;
            T* dwo = dw + static_cast<size_t>(o) * twoci;
            db[o] += g;
            T* dxj = dx ? dx + static_cast<size_t>(j) * ci : nullptr;
            for (int c = 0; c < ci; ++c) {
                const T diff = xj[c] - xi[c];
                dwo[c] += g * xi[c];
                dwo[ci + c] += g * diff;
                if (dx) {
                    dxi[c] += g * (wo[c] - wo[ci + c]);
                    dxj[c] += g * wo[ci + c];
                }
            }
        }
    }
}

}  // namespace detail

template <typename T>
Tensor<T> edgeconv_forward(const Tensor<T>& x, const NeighborTable& nbrs,
                           const Tensor<T>& w, const Tensor<T>& b, T slope) {
    if (w.cols() != 2 * x.cols() || w.rows() != b.rows()) {
        throw std::invalid_argument("edgeconv_forward: shape mismatch");
    }
    if (static_cast<int>(nbrs.indices.size()) != x.rows()) {
        throw std::invalid_argument("edgeconv_forward: neighbor table size mismatch");
    }
    Tensor<T> y({x.rows(), w.rows()});
    detail::edgeconv_core(x.data.data(), x.rows(), x.cols(), nbrs, w.data.data(),
                          b.data.data(), w.rows(), slope, y.data.data(), nullptr);
    return y;
}

template <typename T>
RtnInput<T> prepare_input(const PointCloud& cloud, const RtnConfig& cfg) {
    const int n = static_cast<int>(cloud.size());
    RtnInput<T> in;
    in.n_points = n;
    in.coords.reserve(static_cast<size_t>(n) * 3);
    for (const Vec3& p : cloud.points) {
        in.coords.push_back(static_cast<T>(p.x()));
        in.coords.push_back(static_cast<T>(p.y()));
        in.coords.push_back(static_cast<T>(p.z()));
    }
    if (cfg.has_global()) {
        if (cfg.m_keypoints > n) {
            throw std::invalid_argument("rtn: m_keypoints exceeds cloud size");
        }
        in.keypoints = farthest_point_sampling(cloud, cfg.m_keypoints);
    }
    if (cfg.has_local()) {
        if (cfg.knn_k >= n) throw std::invalid_argument("rtn: knn_k >= cloud size");
        in.nbrs = knn(cloud, cfg.knn_k);
    }
    return in;
}

namespace detail {

// Everything the backward pass needs from the forward pass.
template <typename T>
struct Tape {
    // global branch
    std::vector<T> kp_coords;              // [m, 3]
    std::vector<std::vector<T>> g_acts;    // per MLP layer, [m, w]
    std::vector<T> g_pool;
    std::vector<int> g_pool_arg;
    std::vector<T> g_feat;
    // local branch
    std::vector<std::vector<T>> l_acts;    // per EdgeConv layer output, [n, w]
    std::vector<std::vector<int>> l_args;  // per layer argmax slots
    std::vector<T> l_concat;               // [n, sum of first-4 widths]
    std::vector<T> l_agg;                  // [n, aggregate_width]
    std::vector<int> l_agg_arg;
    std::vector<T> l_pool;
    std::vector<int> l_pool_arg;
    std::vector<T> l_feat;
    // head
    std::vector<T> fused;
    std::vector<std::vector<T>> h_acts;
    std::vector<T> logits;
};

template <typename T>
void forward_impl(const RtnInput<T>& in, const ModelParams<T>& p, const RtnConfig& cfg,
                  Tape<T>& tape) {
    const T slope = static_cast<T>(cfg.leaky_slope);
    if (cfg.has_global()) {
        const int m = static_cast<int>(in.keypoints.size());
        tape.kp_coords.resize(static_cast<size_t>(m) * 3);
        for (int i = 0; i < m; ++i) {
            for (int c = 0; c < 3; ++c) {
                tape.kp_coords[static_cast<size_t>(i) * 3 + c] =
                    in.coords[static_cast<size_t>(in.keypoints[static_cast<size_t>(i)]) * 3 + c];
            }
        }
        const T* cur = tape.kp_coords.data();
        int ci = 3;
        tape.g_acts.resize(cfg.global_mlp_widths.size());
        for (size_t l = 0; l < cfg.global_mlp_widths.size(); ++l) {
            const Tensor<T>& w = p.at("global.mlp" + std::to_string(l) + ".w");
            const Tensor<T>& b = p.at("global.mlp" + std::to_string(l) + ".b");
            tape.g_acts[l].assign(static_cast<size_t>(m) * w.rows(), T(0));
            linear_rows(cur, m, ci, w.data.data(), b.data.data(), w.rows(), slope, true,
                        tape.g_acts[l].data());
            cur = tape.g_acts[l].data();
            ci = w.rows();
        }
        tape.g_pool.assign(static_cast<size_t>(ci), T(0));
        tape.g_pool_arg.assign(static_cast<size_t>(ci), 0);
        maxpool_rows(cur, m, ci, tape.g_pool.data(), tape.g_pool_arg.data());
        const Tensor<T>& wf = p.at("global.fc.w");
        const Tensor<T>& bf = p.at("global.fc.b");
        tape.g_feat.assign(static_cast<size_t>(wf.rows()), T(0));
        linear_rows(tape.g_pool.data(), 1, ci, wf.data.data(), bf.data.data(), wf.rows(),
                    slope, true, tape.g_feat.data());
    }
    if (cfg.has_local()) {
        const int n = in.n_points;
        const int k = static_cast<int>(in.nbrs.k);
        (void)k;
        const size_t n_ec = cfg.edgeconv_widths.size();
        tape.l_acts.resize(n_ec);
        tape.l_args.resize(n_ec + 1);
        const T* cur = in.coords.data();
        int ci = 3;
        int concat_w = 0;
        for (size_t l = 0; l < n_ec; ++l) {
            const Tensor<T>& w = p.at("local.ec" + std::to_string(l) + ".w");
            const Tensor<T>& b = p.at("local.ec" + std::to_string(l) + ".b");
            tape.l_acts[l].assign(static_cast<size_t>(n) * w.rows(), T(0));
            tape.l_args[l].assign(static_cast<size_t>(n) * w.rows(), 0);
            edgeconv_core(cur, n, ci, in.nbrs, w.data.data(), b.data.data(), w.rows(),
                          slope, tape.l_acts[l].data(), tape.l_args[l].data());
            cur = tape.l_acts[l].data();
            ci = w.rows();
            concat_w += w.rows();
        }
        tape.l_concat.assign(static_cast<size_t>(n) * concat_w, T(0));
        for (int i = 0; i < n; ++i) {
            int off = 0;
            for (size_t l = 0; l < n_ec; ++l) {
                const int wl = static_cast<int>(tape.l_acts[l].size()) / n;
                for (int c = 0; c < wl; ++c) {
                    tape.l_concat[static_cast<size_t>(i) * concat_w + off + c] =
                        tape.l_acts[l][static_cast<size_t>(i) * wl + c];
                }
                off += wl;
            }
        }
        const Tensor<T>& wa = p.at("local.agg.w");
        const Tensor<T>& ba = p.at("local.agg.b");
        tape.l_agg.assign(static_cast<size_t>(n) * wa.rows(), T(0));
        tape.l_args[n_ec].assign(static_cast<size_t>(n) * wa.rows(), 0);
        edgeconv_core(tape.l_concat.data(), n, concat_w, in.nbrs, wa.data.data(),
                      ba.data.data(), wa.rows(), slope, tape.l_agg.data(),
                      tape.l_args[n_ec].data());
        tape.l_pool.assign(static_cast<size_t>(wa.rows()), T(0));
        tape.l_pool_arg.assign(static_cast<size_t>(wa.rows()), 0);
        maxpool_rows(tape.l_agg.data(), n, wa.rows(), tape.l_pool.data(),
                     tape.l_pool_arg.data());
        const Tensor<T>& wf = p.at("local.fc.w");
        const Tensor<T>& bf = p.at("local.fc.b");
        tape.l_feat.assign(static_cast<size_t>(wf.rows()), T(0));
        linear_rows(tape.l_pool.data(), 1, wa.rows(), wf.data.data(), bf.data.data(),
                    wf.rows(), slope, true, tape.l_feat.data());
    }
    tape.fused.clear();
    if (cfg.has_global()) {
        tape.fused.insert(tape.fused.end(), tape.g_feat.begin(), tape.g_feat.end());
    }
    if (cfg.has_local()) {
        tape.fused.insert(tape.fused.end(), tape.l_feat.begin(), tape.l_feat.end());
    }
    const T* cur = tape.fused.data();
    int ci = static_cast<int>(tape.fused.size());
    tape.h_acts.resize(cfg.head_widths.size());
    for (size_t l = 0; l < cfg.head_widths.size(); ++l) {
        const Tensor<T>& w = p.at("head.fc" + std::to_string(l) + ".w");
        const Tensor<T>& b = p.at("head.fc" + std::to_string(l) + ".b");
        tape.h_acts[l].assign(static_cast<size_t>(w.rows()), T(0));
        linear_rows(cur, 1, ci, w.data.data(), b.data.data(), w.rows(), slope, true,
                    tape.h_acts[l].data());
        cur = tape.h_acts[l].data();
        ci = w.rows();
    }
    const Tensor<T>& wo = p.at("head.out.w");
    const Tensor<T>& bo = p.at("head.out.b");
    tape.logits.assign(static_cast<size_t>(wo.rows()), T(0));
    linear_rows(cur, 1, ci, wo.data.data(), bo.data.data(), wo.rows(), slope, false,
                tape.logits.data());
}

}  // namespace detail

template <typename T>
std::vector<T> rtn_forward(const RtnInput<T>& in, const ModelParams<T>& params,
                           const RtnConfig& cfg) {
    detail::Tape<T> tape;
    detail::forward_impl(in, params, cfg, tape);
    return tape.logits;
}

template <typename T>
T cross_entropy(const std::vector<T>& logits, int label, std::vector<T>* dlogits) {
    const int n = static_cast<int>(logits.size());
    if (label < 0 || label >= n) throw std::out_of_range("cross_entropy: label out of range");
    T mx = logits[0];
    for (const T v : logits) mx = std::max(mx, v);
    T denom = T(0);
    for (const T v : logits) denom += std::exp(v - mx);
    const T log_denom = std::log(denom);
    const T loss = -(logits[static_cast<size_t>(label)] - mx - log_denom);
    if (dlogits) {
        dlogits->resize(logits.size());
        for (int i = 0; i < n; ++i) {
            (*dlogits)[static_cast<size_t>(i)] =
                std::exp(logits[static_cast<size_t>(i)] - mx) / denom;
        }
        (*dlogits)[static_cast<size_t>(label)] -= T(1);
    }
    return loss;
}

template <typename T>
ModelParams<T> rtn_backward(const RtnInput<T>& in, const ModelParams<T>& params,
                            const RtnConfig& cfg, int label, T* loss_out) {
    using detail::linear_rows_backward;
    detail::Tape<T> tape;
    detail::forward_impl(in, params, cfg, tape);
    std::vector<T> dlogits;
    const T loss = cross_entropy(tape.logits, label, &dlogits);
    if (loss_out) *loss_out = loss;

    ModelParams<T> grads;
    grads.names.reserve(params.names.size());
    grads.tensors.reserve(params.tensors.size());
    for (size_t i = 0; i < params.names.size(); ++i) {
        grads.names.push_back(params.names[i]);
        grads.tensors.push_back(Tensor<T>(params.tensors[i].shape));
    }
    const T slope = static_cast<T>(cfg.leaky_slope);

    // head
    const T* head_in =
        cfg.head_widths.empty() ? tape.fused.data() : tape.h_acts.back().data();
    const int head_in_w = cfg.head_widths.empty() ? static_cast<int>(tape.fused.size())
                                                  : cfg.head_widths.back();
    std::vector<T> dcur(static_cast<size_t>(head_in_w), T(0));
    {
        const Tensor<T>& wo = params.at("head.out.w");
        linear_rows_backward(head_in, 1, head_in_w, wo.data.data(), wo.rows(),
                             dlogits.data(), grads.at("head.out.w").data.data(),
                             grads.at("head.out.b").data.data(), dcur.data());
    }
    for (int l = static_cast<int>(cfg.head_widths.size()) - 1; l >= 0; --l) {
        const std::string nm = "head.fc" + std::to_string(l);
        const Tensor<T>& w = params.at(nm + ".w");
        const std::vector<T>& out = tape.h_acts[static_cast<size_t>(l)];
        for (size_t i = 0; i < dcur.size(); ++i) {
            dcur[i] *= detail::lrelu_grad_from_out(out[i], slope);
        }
        const T* lin = l == 0 ? tape.fused.data() : tape.h_acts[static_cast<size_t>(l - 1)].data();
        const int lw = l == 0 ? static_cast<int>(tape.fused.size()) : cfg.head_widths[static_cast<size_t>(l - 1)];
        std::vector<T> dprev(static_cast<size_t>(lw), T(0));
        linear_rows_backward(lin, 1, lw, w.data.data(), w.rows(), dcur.data(),
                             grads.at(nm + ".w").data.data(), grads.at(nm + ".b").data.data(),
                             dprev.data());
        dcur = std::move(dprev);
    }

    // split fused gradient back to the branches
    std::vector<T> dg, dl;
    size_t off = 0;
    if (cfg.has_global()) {
        dg.assign(dcur.begin(), dcur.begin() + static_cast<long>(tape.g_feat.size()));
        off = tape.g_feat.size();
    }
    if (cfg.has_local()) {
        dl.assign(dcur.begin() + static_cast<long>(off), dcur.end());
    }

    if (cfg.has_global()) {
        const int m = static_cast<int>(in.keypoints.size());
        const int pooled_w = static_cast<int>(tape.g_pool.size());
        for (size_t i = 0; i < dg.size(); ++i) {
            dg[i] *= detail::lrelu_grad_from_out(tape.g_feat[i], slope);
        }
        std::vector<T> dpool(static_cast<size_t>(pooled_w), T(0));
        const Tensor<T>& wf = params.at("global.fc.w");
        linear_rows_backward(tape.g_pool.data(), 1, pooled_w, wf.data.data(), wf.rows(),
                             dg.data(), grads.at("global.fc.w").data.data(),
                             grads.at("global.fc.b").data.data(), dpool.data());
        // unpool to the argmax rows
        std::vector<T> drows(static_cast<size_t>(m) * pooled_w, T(0));
        for (int ch = 0; ch < pooled_w; ++ch) {
            drows[static_cast<size_t>(tape.g_pool_arg[static_cast<size_t>(ch)]) * pooled_w + ch] =
                dpool[static_cast<size_t>(ch)];
        }
        for (int l = static_cast<int>(cfg.global_mlp_widths.size()) - 1; l >= 0; --l) {
            const std::string nm = "global.mlp" + std::to_string(l);
            const Tensor<T>& w = params.at(nm + ".w");
            const std::vector<T>& out = tape.g_acts[static_cast<size_t>(l)];
            for (size_t i = 0; i < drows.size(); ++i) {
                drows[i] *= detail::lrelu_grad_from_out(out[i], slope);
            }
            const T* lin = l == 0 ? tape.kp_coords.data()
                                  : tape.g_acts[static_cast<size_t>(l - 1)].data();
            const int lw = l == 0 ? 3 : cfg.global_mlp_widths[static_cast<size_t>(l - 1)];
            std::vector<T> dprev;
            if (l > 0) dprev.assign(static_cast<size_t>(m) * lw, T(0));
            linear_rows_backward(lin, m, lw, w.data.data(), w.rows(), drows.data(),
                                 grads.at(nm + ".w").data.data(),
                                 grads.at(nm + ".b").data.data(),
                                 l > 0 ? dprev.data() : nullptr);
            drows = std::move(dprev);
        }
    }

    if (cfg.has_local()) {
        const int n = in.n_points;
        const size_t n_ec = cfg.edgeconv_widths.size();
        const int agg_w = cfg.aggregate_width;
        for (size_t i = 0; i < dl.size(); ++i) {
            dl[i] *= detail::lrelu_grad_from_out(tape.l_feat[i], slope);
        }
        std::vector<T> dpool(static_cast<size_t>(agg_w), T(0));
        const Tensor<T>& wf = params.at("local.fc.w");
        linear_rows_backward(tape.l_pool.data(), 1, agg_w, wf.data.data(), wf.rows(),
                             dl.data(), grads.at("local.fc.w").data.data(),
                             grads.at("local.fc.b").data.data(), dpool.data());
        std::vector<T> dagg(static_cast<size_t>(n) * agg_w, T(0));
        for (int ch = 0; ch < agg_w; ++ch) {
            dagg[static_cast<size_t>(tape.l_pool_arg[static_cast<size_t>(ch)]) * agg_w + ch] =
                dpool[static_cast<size_t>(ch)];
        }
        const int concat_w = static_cast<int>(tape.l_concat.size()) / n;
        std::vector<T> dconcat(static_cast<size_t>(n) * concat_w, T(0));
        {
            const Tensor<T>& wa = params.at("local.agg.w");
            detail::edgeconv_backward(tape.l_concat.data(), n, concat_w, in.nbrs,
                                      wa.data.data(), wa.rows(), slope, tape.l_agg.data(),
                                      tape.l_args[n_ec].data(), dagg.data(),
                                      grads.at("local.agg.w").data.data(),
                                      grads.at("local.agg.b").data.data(), dconcat.data());
        }
        // split the concat gradient per layer, then run the EdgeConv chain backward
        std::vector<std::vector<T>> dacts(n_ec);
        {
            int coff = 0;
            for (size_t l = 0; l < n_ec; ++l) {
                const int wl = cfg.edgeconv_widths[l];
                dacts[l].assign(static_cast<size_t>(n) * wl, T(0));
                for (int i = 0; i < n; ++i) {
                    for (int c = 0; c < wl; ++c) {
                        dacts[l][static_cast<size_t>(i) * wl + c] =
                            dconcat[static_cast<size_t>(i) * concat_w + coff + c];
                    }
                }
                coff += wl;
            }
        }
        for (int l = static_cast<int>(n_ec) - 1; l >= 0; --l) {
            const std::string nm = "local.ec" + std::to_string(l);
            const Tensor<T>& w = params.at(nm + ".w");
            const T* lin = l == 0 ? in.coords.data() : tape.l_acts[static_cast<size_t>(l - 1)].data();
            const int lw = l == 0 ? 3 : cfg.edgeconv_widths[static_cast<size_t>(l - 1)];
            std::vector<T> dprev;
            T* dprev_ptr = nullptr;
            if (l > 0) {
                dprev.assign(static_cast<size_t>(n) * lw, T(0));
                dprev_ptr = dprev.data();
            }
            detail::edgeconv_backward(lin, n, lw, in.nbrs, w.data.data(), w.rows(), slope,
                                      tape.l_acts[static_cast<size_t>(l)].data(),
                                      tape.l_args[static_cast<size_t>(l)].data(),
                                      dacts[static_cast<size_t>(l)].data(),
                                      grads.at(nm + ".w").data.data(),
                                      grads.at(nm + ".b").data.data(), dprev_ptr);
            if (l > 0) {
                // downstream layers also consumed this activation via the concat
                for (size_t i = 0; i < dprev.size(); ++i) {
                    dacts[static_cast<size_t>(l - 1)][i] += dprev[i];
                }
            }
        }
    }
    return grads;
}

template <typename T>
ModelParams<T> init_params(const RtnConfig& cfg) {
    const std::vector<ParamSpec> specs = param_specs(cfg);
    Rng rng(cfg.seed);
    ModelParams<T> p;
    for (const ParamSpec& spec : specs) {
        Tensor<T> t(spec.shape);
        const bool is_weight = spec.shape.size() == 2;
        const bool is_final = spec.name.rfind("head.out.", 0) == 0;
        if (is_weight && !is_final) {
            const double fan_in = spec.shape[1];
            const double fan_out = spec.shape[0];
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            for (T& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
        }
        p.names.push_back(spec.name);
        p.tensors.push_back(std::move(t));
    }
    return p;
}

}  // namespace rtn

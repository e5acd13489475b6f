#include "weakprog/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "weakprog/error.hpp"
#include "weakprog/rng.hpp"

namespace weakprog {

namespace {

using ConstMap = Eigen::Map<const Mat>;
using MutMap = Eigen::Map<Mat>;
using ConstRowMap = Eigen::Map<const Eigen::RowVectorXd>;
using StridedConstMap = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;

constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

const char* head_prefix(Head h) {
    switch (h) {
    case Head::pu: return "head.pu";
    case Head::noise: return "head.noise";
    case Head::main: return "head.main";
    }
    return "head.?";
}

/// Tensor indices resolved once per call.
struct Layout {
    std::size_t conv_w, conv_b, enc_w, enc_b, tmp_w, tmp_b;
    // gated_simple
    std::size_t wf = kAbsent, uf = kAbsent, bf = kAbsent, wc = kAbsent, uc = kAbsent, bc = kAbsent;
    // full_lstm
    std::size_t wx = kAbsent, uh = kAbsent, bl = kAbsent;
    std::size_t head_w[3] = {kAbsent, kAbsent, kAbsent};
    std::size_t head_b[3] = {kAbsent, kAbsent, kAbsent};
    std::size_t phi_w, phi_b, psi_w, psi_b;

    explicit Layout(const ModelParams& p) {
        conv_w = p.index_of("conv.w");
        conv_b = p.index_of("conv.b");
        enc_w = p.index_of("enc.w");
        enc_b = p.index_of("enc.b");
        tmp_w = p.index_of("tmp.w");
        tmp_b = p.index_of("tmp.b");
        if (p.config.cell == CellKind::gated_simple) {
            wf = p.index_of("cell.wf");
            uf = p.index_of("cell.uf");
            bf = p.index_of("cell.bf");
            wc = p.index_of("cell.wc");
            uc = p.index_of("cell.uc");
            bc = p.index_of("cell.bc");
        } else {
            wx = p.index_of("cell.wx");
            uh = p.index_of("cell.uh");
            bl = p.index_of("cell.b");
        }
        for (Head h : {Head::pu, Head::noise, Head::main}) {
            if (!p.config.has_head(h)) continue;
            head_w[static_cast<int>(h)] = p.index_of(std::string(head_prefix(h)) + ".w");
            head_b[static_cast<int>(h)] = p.index_of(std::string(head_prefix(h)) + ".b");
        }
        phi_w = p.index_of("proj.phi.w");
        phi_b = p.index_of("proj.phi.b");
        psi_w = p.index_of("proj.psi.w");
        psi_b = p.index_of("proj.psi.b");
    }
};

ConstMap as_mat(const Tensor& t) {
    return ConstMap(t.data.data(), static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
}
ConstRowMap as_row(const Tensor& t) { return ConstRowMap(t.data.data(), static_cast<Eigen::Index>(t.data.size())); }
MutMap grad_mat(Gradients& g, const ModelParams& p, std::size_t idx) {
    return MutMap(g[idx].data(), static_cast<Eigen::Index>(p.tensors[idx].shape[0]),
                  static_cast<Eigen::Index>(p.tensors[idx].shape[1]));
}
Eigen::Map<Eigen::RowVectorXd> grad_row(Gradients& g, std::size_t idx) {
    return Eigen::Map<Eigen::RowVectorXd>(g[idx].data(), static_cast<Eigen::Index>(g[idx].size()));
}

Mat sigmoid(const Mat& a) { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); }

// Vectorized exp is an order of magnitude faster than scalar std::tanh for doubles.
Mat tanh_of(const Mat& a) { return (1.0 - 2.0 / ((2.0 * a.array()).exp() + 1.0)).matrix(); }

/// tanh derivative expressed through the activation output.
Mat tanh_grad(const Mat& y) { return (1.0 - y.array().square()).matrix(); }

struct EncoderCache {
    Eigen::Index N = 0, T = 0, P = 0, C = 0, K = 0, F = 0, Kt = 0, S = 0, Z = 0;
    Mat xcol;  // (N*T*P) x K, standardized
    Mat h1;    // (N*T*P) x C
    Mat e;     // (N*T) x F
    Mat uin;   // (N*S) x (Kt*F)
    Mat u;     // (N*S) x F
    std::vector<Mat> h;  // S + 1 states, h[0] = 0
    // gated_simple
    std::vector<Mat> gate, cand;
    // full_lstm
    std::vector<Mat> c, gi, gf, gg, go;
};

/// Source point of tap j for output point p, flattened as p * K + j (circular padding).
std::vector<Eigen::Index> circular_taps(Eigen::Index P, Eigen::Index K) {
    std::vector<Eigen::Index> taps(static_cast<std::size_t>(P * K));
    for (Eigen::Index p = 0; p < P; ++p)
        for (Eigen::Index j = 0; j < K; ++j) taps[p * K + j] = (((p + j - K / 2) % P) + P) % P;
    return taps;
}

EncoderCache encode(const ModelParams& params, const Layout& L, const Batch& batch) {
    const auto& cfg = params.config;
    if (batch.tau != cfg.tau || batch.P != cfg.P)
        throw DataError("forward: observation shape " + std::to_string(batch.tau) + "x" + std::to_string(batch.P) +
                        " does not match model " + std::to_string(cfg.tau) + "x" + std::to_string(cfg.P));
    if (batch.n == 0) throw DataError("forward: empty batch");
    for (double v : batch.x)
        if (!std::isfinite(v)) throw NumericalError("forward: non-finite input value");

    EncoderCache c;
    c.N = static_cast<Eigen::Index>(batch.n);
    c.T = cfg.tau;
    c.P = cfg.P;
    c.C = cfg.conv_channels;
    c.K = cfg.conv_kernel;
    c.F = cfg.feature_dim;
    c.Kt = cfg.temporal_kernel;
    c.S = c.T - c.Kt + 1;
    c.Z = cfg.hidden_dim;
    const auto taps = circular_taps(c.P, c.K);
    std::vector<double> xs(static_cast<std::size_t>(c.P));
    c.xcol.resize(c.N * c.T * c.P, c.K);
    double* col = c.xcol.data();
    for (Eigen::Index r = 0; r < c.N * c.T; ++r) {
        const double* xr = batch.x.data() + r * c.P;
        for (Eigen::Index q = 0; q < c.P; ++q) xs[q] = (xr[q] - params.input_mean[q]) / params.input_sd[q];
        for (std::size_t k = 0; k < taps.size(); ++k) *col++ = xs[taps[k]];
    }
    c.h1 = tanh_of((c.xcol * as_mat(params.tensors[L.conv_w]).transpose()).rowwise() +
                   as_row(params.tensors[L.conv_b]));
    const ConstMap v(c.h1.data(), c.N * c.T, c.P * c.C);
    c.e = tanh_of((v * as_mat(params.tensors[L.enc_w]).transpose()).rowwise() + as_row(params.tensors[L.enc_b]));
    c.uin.resize(c.N * c.S, c.Kt * c.F);
    for (Eigen::Index n = 0; n < c.N; ++n)
        for (Eigen::Index s = 0; s < c.S; ++s)
            std::memcpy(c.uin.data() + (n * c.S + s) * c.Kt * c.F, c.e.data() + (n * c.T + s) * c.F,
                        sizeof(double) * static_cast<std::size_t>(c.Kt * c.F));
    c.u = tanh_of((c.uin * as_mat(params.tensors[L.tmp_w]).transpose()).rowwise() + as_row(params.tensors[L.tmp_b]));

    c.h.assign(1, Mat::Zero(c.N, c.Z));
    if (cfg.cell == CellKind::gated_simple) {
        const auto Wf = as_mat(params.tensors[L.wf]);
        const auto Uf = as_mat(params.tensors[L.uf]);
        const auto Wc = as_mat(params.tensors[L.wc]);
        const auto Uc = as_mat(params.tensors[L.uc]);
        const auto bf = as_row(params.tensors[L.bf]);
        const auto bc = as_row(params.tensors[L.bc]);
        for (Eigen::Index s = 0; s < c.S; ++s) {
            const StridedConstMap us(c.u.data() + s * c.F, c.N, c.F, Eigen::OuterStride<>(c.S * c.F));
            const Mat& hp = c.h.back();
            Mat f = sigmoid((us * Wf.transpose() + hp * Uf.transpose()).rowwise() + bf);
            const Mat g = f.cwiseProduct(hp);
            Mat cand = tanh_of((us * Wc.transpose() + g * Uc.transpose()).rowwise() + bc);
            Mat hn = (1.0 - f.array()).matrix().cwiseProduct(hp) + f.cwiseProduct(cand);
            c.gate.push_back(std::move(f));
            c.cand.push_back(std::move(cand));
            c.h.push_back(std::move(hn));
        }
    } else {
        const auto Wx = as_mat(params.tensors[L.wx]);
        const auto Uh = as_mat(params.tensors[L.uh]);
        const auto b = as_row(params.tensors[L.bl]);
        c.c.assign(1, Mat::Zero(c.N, c.Z));
        for (Eigen::Index s = 0; s < c.S; ++s) {
            const StridedConstMap us(c.u.data() + s * c.F, c.N, c.F, Eigen::OuterStride<>(c.S * c.F));
            const Mat a = (us * Wx.transpose() + c.h.back() * Uh.transpose()).rowwise() + b;
            Mat i = sigmoid(a.leftCols(c.Z));
            Mat f = sigmoid(a.middleCols(c.Z, c.Z));
            Mat g = tanh_of(a.middleCols(2 * c.Z, c.Z));
            Mat o = sigmoid(a.rightCols(c.Z));
            Mat cn = f.cwiseProduct(c.c.back()) + i.cwiseProduct(g);
            Mat hn = o.cwiseProduct(tanh_of(cn));
            c.gi.push_back(std::move(i));
            c.gf.push_back(std::move(f));
            c.gg.push_back(std::move(g));
            c.go.push_back(std::move(o));
            c.c.push_back(std::move(cn));
            c.h.push_back(std::move(hn));
        }
    }
    return c;
}

/// Backpropagates dZ through the encoder. Parameter gradients accumulate into
/// `grads` when non-null; raw-input gradients are written to `dx` when non-null.
void encode_backward(const ModelParams& params, const Layout& L, const EncoderCache& c, const Mat& dz,
                     Gradients* grads, std::vector<double>* dx) {
    const auto& cfg = params.config;
    Mat du = Mat::Zero(c.N * c.S, c.F);
    Mat dh = dz;
    if (cfg.cell == CellKind::gated_simple) {
        const auto Wf = as_mat(params.tensors[L.wf]);
        const auto Uf = as_mat(params.tensors[L.uf]);
        const auto Wc = as_mat(params.tensors[L.wc]);
        const auto Uc = as_mat(params.tensors[L.uc]);
        for (Eigen::Index s = c.S - 1; s >= 0; --s) {
            const StridedConstMap us(c.u.data() + s * c.F, c.N, c.F, Eigen::OuterStride<>(c.S * c.F));
            const Mat& hp = c.h[s];
            const Mat& f = c.gate[s];
            const Mat& cand = c.cand[s];
            Mat df = dh.cwiseProduct(cand - hp);
            const Mat dcand = dh.cwiseProduct(f);
            Mat dhp = dh.cwiseProduct((1.0 - f.array()).matrix());
            const Mat dac = dcand.cwiseProduct((1.0 - cand.array().square()).matrix());
            const Mat g = f.cwiseProduct(hp);
            const Mat dg = dac * Uc;
            df += dg.cwiseProduct(hp);
            dhp += dg.cwiseProduct(f);
            const Mat daf = df.cwiseProduct((f.array() * (1.0 - f.array())).matrix());
            dhp += daf * Uf;
            const Mat dus = dac * Wc + daf * Wf;
            for (Eigen::Index n = 0; n < c.N; ++n) du.row(n * c.S + s) += dus.row(n);
            if (grads) {
                grad_mat(*grads, params, L.wc).noalias() += dac.transpose() * us;
                grad_mat(*grads, params, L.uc).noalias() += dac.transpose() * g;
                grad_row(*grads, L.bc) += dac.colwise().sum();
                grad_mat(*grads, params, L.wf).noalias() += daf.transpose() * us;
                grad_mat(*grads, params, L.uf).noalias() += daf.transpose() * hp;
                grad_row(*grads, L.bf) += daf.colwise().sum();
            }
            dh = std::move(dhp);
        }
    } else {
        const auto Wx = as_mat(params.tensors[L.wx]);
        const auto Uh = as_mat(params.tensors[L.uh]);
        Mat dcell = Mat::Zero(c.N, c.Z);
        for (Eigen::Index s = c.S - 1; s >= 0; --s) {
            const StridedConstMap us(c.u.data() + s * c.F, c.N, c.F, Eigen::OuterStride<>(c.S * c.F));
            const Mat tc = tanh_of(c.c[s + 1]);
            const Mat& i = c.gi[s];
            const Mat& f = c.gf[s];
            const Mat& g = c.gg[s];
            const Mat& o = c.go[s];
            const Mat dout = dh.cwiseProduct(tc);
            dcell += dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
            Mat da(c.N, 4 * c.Z);
            da.leftCols(c.Z) = dcell.cwiseProduct(g).cwiseProduct((i.array() * (1.0 - i.array())).matrix());
            da.middleCols(c.Z, c.Z) =
                dcell.cwiseProduct(c.c[s]).cwiseProduct((f.array() * (1.0 - f.array())).matrix());
            da.middleCols(2 * c.Z, c.Z) = dcell.cwiseProduct(i).cwiseProduct((1.0 - g.array().square()).matrix());
            da.rightCols(c.Z) = dout.cwiseProduct((o.array() * (1.0 - o.array())).matrix());
            dcell = dcell.cwiseProduct(f).eval();
            const Mat dus = da * Wx;
            for (Eigen::Index n = 0; n < c.N; ++n) du.row(n * c.S + s) += dus.row(n);
            if (grads) {
                grad_mat(*grads, params, L.wx).noalias() += da.transpose() * us;
                grad_mat(*grads, params, L.uh).noalias() += da.transpose() * c.h[s];
                grad_row(*grads, L.bl) += da.colwise().sum();
            }
            dh = da * Uh;
        }
    }

    const Mat da3 = du.cwiseProduct(tanh_grad(c.u));
    if (grads) {
        grad_mat(*grads, params, L.tmp_w).noalias() += da3.transpose() * c.uin;
        grad_row(*grads, L.tmp_b) += da3.colwise().sum();
    }
    const Mat duin = da3 * as_mat(params.tensors[L.tmp_w]);
    Mat de = Mat::Zero(c.N * c.T, c.F);
    for (Eigen::Index n = 0; n < c.N; ++n)
        for (Eigen::Index s = 0; s < c.S; ++s)
            for (Eigen::Index j = 0; j < c.Kt; ++j)
                de.row(n * c.T + s + j) += duin.block(n * c.S + s, j * c.F, 1, c.F);

    const Mat da2 = de.cwiseProduct(tanh_grad(c.e));
    const ConstMap v(c.h1.data(), c.N * c.T, c.P * c.C);
    if (grads) {
        grad_mat(*grads, params, L.enc_w).noalias() += da2.transpose() * v;
        grad_row(*grads, L.enc_b) += da2.colwise().sum();
    }
    Mat dv = da2 * as_mat(params.tensors[L.enc_w]);  // (N*T) x (P*C)
    const MutMap dh1(dv.data(), c.N * c.T * c.P, c.C);
    const Mat da1 = dh1.cwiseProduct(tanh_grad(c.h1));
    if (grads) {
        grad_mat(*grads, params, L.conv_w).noalias() += da1.transpose() * c.xcol;
        grad_row(*grads, L.conv_b) += da1.colwise().sum();
    }
    if (dx) {
        const Mat dxcol = da1 * as_mat(params.tensors[L.conv_w]);
        dx->assign(static_cast<std::size_t>(c.N * c.T * c.P), 0.0);
        const auto taps = circular_taps(c.P, c.K);
        const double* col = dxcol.data();
        for (Eigen::Index r = 0; r < c.N * c.T; ++r) {
            double* dr = dx->data() + r * c.P;
            for (std::size_t k = 0; k < taps.size(); ++k) dr[taps[k]] += *col++;
            for (Eigen::Index q = 0; q < c.P; ++q) dr[q] /= params.input_sd[q];
        }
    }
}

Mat linear(const Mat& x, const Tensor& w, const Tensor& b) {
    return (x * as_mat(w).transpose()).rowwise() + as_row(b);
}

void linear_backward(const ModelParams& params, std::size_t wi, std::size_t bi, const Mat& x, const Mat& dy,
                     Gradients* grads, Mat& dx) {
    if (grads) {
        grad_mat(*grads, params, wi).noalias() += dy.transpose() * x;
        grad_row(*grads, bi) += dy.colwise().sum();
    }
    dx.noalias() += dy * as_mat(params.tensors[wi]);
}

void add_tensor(ModelParams& p, const std::string& name, std::vector<std::size_t> shape, std::size_t fan_in,
                bool bias) {
    Tensor t;
    t.name = name;
    t.shape = std::move(shape);
    std::size_t n = 1;
    for (auto d : t.shape) n *= d;
    t.data.assign(n, 0.0);
    if (!bias) {
        Rng rng(derive_seed(p.config.init_seed, fnv1a64(name)));
        // LeCun uniform: unit-variance pre-activations keep tanh layers out of the flat regime.
        const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
        for (double& v : t.data) v = rng.uniform(-bound, bound);
    }
    p.tensors.push_back(std::move(t));
}

}  // namespace

std::string to_string(Head h) {
    switch (h) {
    case Head::pu: return "pu";
    case Head::noise: return "noise";
    case Head::main: return "main";
    }
    return "?";
}

Head head_from_string(const std::string& s) {
    if (s == "pu") return Head::pu;
    if (s == "noise") return Head::noise;
    if (s == "main") return Head::main;
    throw ConfigError("unknown head '" + s + "'");
}

std::string to_string(CellKind c) { return c == CellKind::gated_simple ? "gated_simple" : "full_lstm"; }

CellKind cell_from_string(const std::string& s) {
    if (s == "gated_simple") return CellKind::gated_simple;
    if (s == "full_lstm") return CellKind::full_lstm;
    throw ConfigError("unknown cell kind '" + s + "'");
}

bool ModelConfig::has_head(Head h) const {
    switch (h) {
    case Head::pu: return head_pu;
    case Head::noise: return head_noise;
    case Head::main: return head_main;
    }
    return false;
}

void ModelConfig::validate() const {
    auto req = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("model config: ") + what);
    };
    req(P >= 1 && tau >= 1, "P and tau must be positive");
    req(conv_kernel % 2 == 1, "conv_kernel must be odd");
    req(tau >= temporal_kernel && temporal_kernel >= 1, "tau must be >= temporal_kernel >= 1");
    req(n_classes == 2, "n_classes must be 2");
    req(conv_channels >= 1 && feature_dim >= 1 && hidden_dim >= 1 && proj_dim >= 1, "layer sizes must be positive");
    req(head_pu || head_noise || head_main, "at least one head must be enabled");
}

void ModelConfig::to_kv(KvConfig& kv, const std::string& prefix) const {
    kv.set(prefix + "P", std::to_string(P));
    kv.set(prefix + "tau", std::to_string(tau));
    kv.set(prefix + "conv_channels", std::to_string(conv_channels));
    kv.set(prefix + "conv_kernel", std::to_string(conv_kernel));
    kv.set(prefix + "feature_dim", std::to_string(feature_dim));
    kv.set(prefix + "temporal_kernel", std::to_string(temporal_kernel));
    kv.set(prefix + "hidden_dim", std::to_string(hidden_dim));
    kv.set(prefix + "n_classes", std::to_string(n_classes));
    kv.set(prefix + "proj_dim", std::to_string(proj_dim));
    kv.set(prefix + "head_pu", head_pu ? "true" : "false");
    kv.set(prefix + "head_noise", head_noise ? "true" : "false");
    kv.set(prefix + "head_main", head_main ? "true" : "false");
    kv.set(prefix + "cell", to_string(cell));
    kv.set(prefix + "init_seed", std::to_string(init_seed));
}

ModelConfig ModelConfig::from_kv(const KvConfig& kv, const std::string& prefix) {
    ModelConfig c;
    auto u32 = [&](const char* k, std::uint32_t fb) {
        const auto v = kv.get_int(prefix + k, fb);
        if (v < 0) throw ConfigError(kv.origin() + ": field '" + prefix + k + "' must be >= 0");
        return static_cast<std::uint32_t>(v);
    };
    c.P = u32("P", c.P);
    c.tau = u32("tau", c.tau);
    c.conv_channels = u32("conv_channels", c.conv_channels);
    c.conv_kernel = u32("conv_kernel", c.conv_kernel);
    c.feature_dim = u32("feature_dim", c.feature_dim);
    c.temporal_kernel = u32("temporal_kernel", c.temporal_kernel);
    c.hidden_dim = u32("hidden_dim", c.hidden_dim);
    c.n_classes = u32("n_classes", c.n_classes);
    c.proj_dim = u32("proj_dim", c.proj_dim);
    c.head_pu = kv.get_bool(prefix + "head_pu", c.head_pu);
    c.head_noise = kv.get_bool(prefix + "head_noise", c.head_noise);
    c.head_main = kv.get_bool(prefix + "head_main", c.head_main);
    c.cell = cell_from_string(kv.get_string(prefix + "cell", to_string(c.cell)));
    c.init_seed = kv.get_u64(prefix + "init_seed", c.init_seed);
    return c;
}

std::size_t ModelParams::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < tensors.size(); ++i)
        if (tensors[i].name == name) return i;
    throw DataError("model has no tensor '" + name + "'");
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.data.size();
    return n;
}

bool ModelParams::all_finite() const {
    for (const auto& t : tensors)
        for (double v : t.data)
            if (!std::isfinite(v)) return false;
    return true;
}

Gradients zero_gradients(const ModelParams& params) {
    Gradients g;
    g.reserve(params.tensors.size());
    for (const auto& t : params.tensors) g.emplace_back(t.data.size(), 0.0);
    return g;
}

ModelParams init_params(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    const std::size_t C = cfg.conv_channels, K = cfg.conv_kernel, F = cfg.feature_dim, Z = cfg.hidden_dim;
    const std::size_t Kt = cfg.temporal_kernel, D = cfg.proj_dim, NC = cfg.n_classes;
    add_tensor(p, "conv.w", {C, K}, K, false);
    add_tensor(p, "conv.b", {C}, K, true);
    add_tensor(p, "enc.w", {F, cfg.P * C}, cfg.P * C, false);
    add_tensor(p, "enc.b", {F}, cfg.P * C, true);
    add_tensor(p, "tmp.w", {F, Kt * F}, Kt * F, false);
    add_tensor(p, "tmp.b", {F}, Kt * F, true);
    if (cfg.cell == CellKind::gated_simple) {
        add_tensor(p, "cell.wf", {Z, F}, F + Z, false);
        add_tensor(p, "cell.uf", {Z, Z}, F + Z, false);
        add_tensor(p, "cell.bf", {Z}, F + Z, true);
        add_tensor(p, "cell.wc", {Z, F}, F + Z, false);
        add_tensor(p, "cell.uc", {Z, Z}, F + Z, false);
        add_tensor(p, "cell.bc", {Z}, F + Z, true);
    } else {
        add_tensor(p, "cell.wx", {4 * Z, F}, F + Z, false);
        add_tensor(p, "cell.uh", {4 * Z, Z}, F + Z, false);
        add_tensor(p, "cell.b", {4 * Z}, F + Z, true);
    }
    for (Head h : {Head::pu, Head::noise, Head::main}) {
        if (!cfg.has_head(h)) continue;
        add_tensor(p, std::string(head_prefix(h)) + ".w", {NC, Z}, Z, false);
        add_tensor(p, std::string(head_prefix(h)) + ".b", {NC}, Z, true);
    }
    add_tensor(p, "proj.phi.w", {D, Z}, Z, false);
    add_tensor(p, "proj.phi.b", {D}, Z, true);
    add_tensor(p, "proj.psi.w", {D, Z}, Z, false);
    add_tensor(p, "proj.psi.b", {D}, Z, true);
    p.input_mean.assign(cfg.P, 0.0);
    p.input_sd.assign(cfg.P, 1.0);
    return p;
}

std::size_t expected_parameter_count(const ModelConfig& cfg) {
    const std::size_t C = cfg.conv_channels, K = cfg.conv_kernel, F = cfg.feature_dim, Z = cfg.hidden_dim;
    std::size_t n = C * K + C;
    n += F * cfg.P * C + F;
    n += F * cfg.temporal_kernel * F + F;
    n += cfg.cell == CellKind::gated_simple ? 2 * (Z * F + Z * Z + Z) : 4 * (Z * F + Z * Z + Z);
    const std::size_t heads = (cfg.head_pu ? 1 : 0) + (cfg.head_noise ? 1 : 0) + (cfg.head_main ? 1 : 0);
    n += heads * (cfg.n_classes * Z + cfg.n_classes);
    n += 2 * (cfg.proj_dim * Z + cfg.proj_dim);
    return n;
}

void fit_standardizer(ModelParams& params, std::span<const Observation> train) {
    const std::size_t P = params.config.P;
    std::vector<double> sum(P, 0.0), sq(P, 0.0);
    std::size_t rows = 0;
    for (const auto& o : train) {
        if (o.P != P) throw DataError("fit_standardizer: profile length mismatch");
        for (std::uint32_t t = 0; t < o.tau; ++t) {
            const auto r = o.row(t);
            for (std::size_t p = 0; p < P; ++p) sum[p] += r[p];
            ++rows;
        }
    }
    if (rows < 2) throw DataError("fit_standardizer: need at least two visits");
    for (std::size_t p = 0; p < P; ++p) params.input_mean[p] = sum[p] / static_cast<double>(rows);
    for (const auto& o : train)
        for (std::uint32_t t = 0; t < o.tau; ++t) {
            const auto r = o.row(t);
            for (std::size_t p = 0; p < P; ++p) sq[p] += (r[p] - params.input_mean[p]) * (r[p] - params.input_mean[p]);
        }
    for (std::size_t p = 0; p < P; ++p)
        params.input_sd[p] = std::max(1e-6, std::sqrt(sq[p] / static_cast<double>(rows - 1)));
}

Batch make_batch(std::span<const Observation> obs) {
    Batch b;
    if (obs.empty()) return b;
    b.n = obs.size();
    b.tau = obs.front().tau;
    b.P = obs.front().P;
    b.x.reserve(b.n * b.tau * b.P);
    for (const auto& o : obs) {
        if (o.tau != b.tau || o.P != b.P) throw DataError("make_batch: observations differ in shape");
        b.x.insert(b.x.end(), o.x.begin(), o.x.end());
    }
    return b;
}

Batch make_batch(std::span<const Observation> obs, std::span<const std::size_t> indices) {
    Batch b;
    if (indices.empty()) return b;
    b.n = indices.size();
    b.tau = obs[indices.front()].tau;
    b.P = obs[indices.front()].P;
    b.x.reserve(b.n * b.tau * b.P);
    for (auto i : indices) {
        const auto& o = obs[i];
        if (o.tau != b.tau || o.P != b.P) throw DataError("make_batch: observations differ in shape");
        b.x.insert(b.x.end(), o.x.begin(), o.x.end());
    }
    return b;
}

ForwardOutput forward(const ModelParams& params, const Batch& batch, std::span<const Head> heads, bool projections) {
    const Layout L(params);
    const auto cache = encode(params, L, batch);
    ForwardOutput out;
    out.latent = cache.h.back();
    out.logits.resize(3);
    out.probs.resize(3);
    for (Head h : heads) {
        const int hi = static_cast<int>(h);
        if (L.head_w[hi] == kAbsent) throw ConfigError("forward: head '" + to_string(h) + "' is not enabled");
        out.logits[hi] = linear(out.latent, params.tensors[L.head_w[hi]], params.tensors[L.head_b[hi]]);
        out.probs[hi] = softmax_rows(*out.logits[hi]);
    }
    if (projections) {
        out.proj_phi = linear(out.latent, params.tensors[L.phi_w], params.tensors[L.phi_b]);
        out.proj_psi = linear(out.latent, params.tensors[L.psi_w], params.tensors[L.psi_b]);
    }
    return out;
}

ObjectiveValue evaluate_objective(const ModelParams& params, std::span<const Batch> views, const Objective& objective,
                                  Gradients* grads, std::vector<std::vector<double>>* input_grads) {
    const Layout L(params);
    const std::size_t n_views = views.size();
    auto active = [&](double w) { return w != 0.0 || objective.evaluate_zero_weight_terms; };

    std::vector<bool> needed(n_views, false);
    for (const auto& t : objective.class_terms) {
        if (t.view >= n_views) throw ConfigError("objective: class term refers to a missing view");
        if (active(t.weight)) needed[t.view] = true;
    }
    if (objective.contrast) {
        const auto& ct = *objective.contrast;
        if (ct.view_a >= n_views || ct.view_b >= n_views) throw ConfigError("objective: contrast refers to a missing view");
        if (active(ct.weight)) needed[ct.view_a] = needed[ct.view_b] = true;
    }
    if (input_grads) input_grads->assign(n_views, {});

    std::vector<std::optional<EncoderCache>> caches(n_views);
    std::vector<Mat> dz(n_views);
    for (std::size_t v = 0; v < n_views; ++v) {
        if (!needed[v] && !(input_grads && views[v].n > 0)) continue;
        caches[v] = encode(params, L, views[v]);
        dz[v] = Mat::Zero(caches[v]->N, caches[v]->Z);
    }

    ObjectiveValue result;
    for (const auto& t : objective.class_terms) {
        if (!active(t.weight)) {
            result.class_values.push_back(std::nan(""));
            continue;
        }
        const int hi = static_cast<int>(t.head);
        if (L.head_w[hi] == kAbsent) throw ConfigError("objective: head '" + to_string(t.head) + "' is not enabled");
        const auto& cache = *caches[t.view];
        if (t.labels.size() != static_cast<std::size_t>(cache.N)) throw ConfigError("objective: label count mismatch");
        const Mat& z = cache.h.back();
        const Mat logits = linear(z, params.tensors[L.head_w[hi]], params.tensors[L.head_b[hi]]);
        const Mat targets = smoothed_targets(t.labels, static_cast<int>(params.config.n_classes), t.smoothing);
        Mat dlogits;
        const double value = cross_entropy_with_grad(logits, targets, dlogits);
        if (!std::isfinite(value)) throw NumericalError("objective: non-finite classification loss");
        result.class_values.push_back(value);
        result.total += t.weight * value;
        dlogits *= t.weight;
        linear_backward(params, L.head_w[hi], L.head_b[hi], z, dlogits, grads, dz[t.view]);
    }
    if (objective.contrast && active(objective.contrast->weight)) {
        const auto& ct = *objective.contrast;
        const Mat& za = caches[ct.view_a]->h.back();
        const Mat& zb = caches[ct.view_b]->h.back();
        const Mat pa = linear(za, params.tensors[L.phi_w], params.tensors[L.phi_b]);
        const Mat pb = linear(zb, params.tensors[L.psi_w], params.tensors[L.psi_b]);
        Mat dpa, dpb;
        const double value = ntxent_with_grad(pa, pb, ct.temperature, dpa, dpb);
        if (!std::isfinite(value)) throw NumericalError("objective: non-finite contrastive loss");
        result.contrast_value = value;
        result.total += ct.weight * value;
        dpa *= ct.weight;
        dpb *= ct.weight;
        linear_backward(params, L.phi_w, L.phi_b, za, dpa, grads, dz[ct.view_a]);
        linear_backward(params, L.psi_w, L.psi_b, zb, dpb, grads, dz[ct.view_b]);
    }

    for (std::size_t v = 0; v < n_views; ++v) {
        if (!caches[v]) continue;
        encode_backward(params, L, *caches[v], dz[v], grads, input_grads ? &(*input_grads)[v] : nullptr);
    }
    if (grads)
        for (const auto& g : *grads)
            for (double x : g)
                if (!std::isfinite(x)) throw NumericalError("objective: non-finite gradient");
    return result;
}

std::vector<double> score_batch(const ModelParams& params, const Batch& batch, std::span<const Head> heads) {
    const auto out = forward(params, batch, heads);
    std::vector<double> s(batch.n, 1.0);
    for (Head h : heads) {
        const Mat& p = *out.probs[static_cast<int>(h)];
        for (std::size_t i = 0; i < batch.n; ++i) s[i] *= p(static_cast<Eigen::Index>(i), 1);
    }
    return s;
}

std::vector<double> score_input_gradient(const ModelParams& params, const Batch& batch, std::span<const Head> heads) {
    const Layout L(params);
    const auto cache = encode(params, L, batch);
    const Mat& z = cache.h.back();
    const Eigen::Index N = cache.N;
    std::vector<Mat> probs;
    for (Head h : heads) {
        const int hi = static_cast<int>(h);
        if (L.head_w[hi] == kAbsent) throw ConfigError("saliency: head '" + to_string(h) + "' is not enabled");
        probs.push_back(softmax_rows(linear(z, params.tensors[L.head_w[hi]], params.tensors[L.head_b[hi]])));
    }
    Mat dz = Mat::Zero(N, cache.Z);
    for (std::size_t k = 0; k < heads.size(); ++k) {
        const int hi = static_cast<int>(heads[k]);
        Mat dlogits(N, probs[k].cols());
        for (Eigen::Index i = 0; i < N; ++i) {
            double others = 1.0;
            for (std::size_t m = 0; m < heads.size(); ++m)
                if (m != k) others *= probs[m](i, 1);
            const double p1 = probs[k](i, 1);
            for (Eigen::Index j = 0; j < probs[k].cols(); ++j)
                dlogits(i, j) = others * p1 * ((j == 1 ? 1.0 : 0.0) - probs[k](i, j));
        }
        linear_backward(params, L.head_w[hi], L.head_b[hi], z, dlogits, nullptr, dz);
    }
    std::vector<double> dx;
    encode_backward(params, L, cache, dz, nullptr, &dx);
    for (double v : dx)
        if (!std::isfinite(v)) throw NumericalError("saliency: non-finite input gradient");
    return dx;
}

}  // namespace weakprog

#include "dnr/dnrnet.hpp"

#include <algorithm>
#include <random>

#include "dnr/nn/checkpoint.hpp"

namespace dnr {

using nn::Tensor4;

void NetworkConfig::validate() const {
    if (n_blocks < 1) throw ConfigError("network needs at least one block");
    if (channels < 1) throw ConfigError("network channel width must be positive");
    if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("leaky ReLU slope must lie in [0, 1)");
}

Image init_input(const Sinogram& y, const SystemMatrix& A, const ObjectiveConfig& cfg) {
    check_sinogram(A, y);
    validate_counts(y);
    double sens = 0.0;
    for (double s : A.col_sums()) sens += s;
    if (!(sens > 0.0)) throw DomainError("init_input: system matrix has zero sensitivity");
    double counts = 0.0;
    for (double v : y.data) counts += v;
    const double level = counts > 0.0 ? counts / sens : 1.0;
    const auto& g = A.geometry();
    Image uniform(g.n, level, g.pixel_size);
    Image f0(g.n, 0.0, g.pixel_size);
    PoissonGradient op(A, cfg);
    op.negative_gradient(uniform.data, y.data, f0.data);
    return f0;
}

namespace {

void check_batch(const SystemMatrix& A, int batch, int h, int w, std::span<const Sinogram> y) {
    const int n = A.geometry().n;
    if (h != n || w != n)
        throw DimensionError("image tensor is " + std::to_string(h) + "x" + std::to_string(w) +
                             ", geometry expects " + std::to_string(n));
    if (static_cast<int>(y.size()) != batch) throw DimensionError("batch size differs from sinogram count");
    for (const auto& s : y) check_sinogram(A, s);
}

}  // namespace

template <typename T>
Tensor4<T> apply_linear_operator(const Tensor4<T>& f, std::span<const Sinogram> y, const SystemMatrix& A,
                                 const ObjectiveConfig& cfg, std::vector<PoissonGradient>* cache) {
    if (f.c != 1) throw DimensionError("linear operator expects single-channel images");
    check_batch(A, f.b, f.h, f.w, y);
    Tensor4<T> out(f.b, 1, f.h, f.w);
    if (cache) cache->assign(f.b, PoissonGradient(A, cfg));
    std::vector<double> in(f.sample_size());
    std::vector<double> res(f.sample_size());
    for (int b = 0; b < f.b; ++b) {
        const auto src = f.sample(b);
        std::copy(src.begin(), src.end(), in.begin());
        PoissonGradient local(A, cfg);
        PoissonGradient& op = cache ? (*cache)[b] : local;
        op.negative_gradient(in, y[b].data, res);
        auto dst = out.sample(b);
        for (size_t j = 0; j < res.size(); ++j) dst[j] = static_cast<T>(res[j]);
    }
    return out;
}

template <typename T>
Tensor4<T> block_forward(UnitBlock<T>& block, const Tensor4<T>& f_in, std::span<const Sinogram> y,
                         const SystemMatrix& A, const ObjectiveConfig& cfg, BlockTape<T>* tape) {
    Tensor4<T> s = apply_linear_operator(f_in, y, A, cfg, tape ? &tape->operators : nullptr);
    const Tensor4<T> r = block.reg_net.forward(f_in, tape ? &tape->reg : nullptr);
    for (size_t j = 0; j < s.data.size(); ++j) s.data[j] += r.data[j];
    Tensor4<T> out = block.newton_net.forward(s, tape ? &tape->newton : nullptr);
    for (size_t j = 0; j < out.data.size(); ++j) out.data[j] += f_in.data[j];
    return out;
}

template <typename T>
Tensor4<T> block_infer(const UnitBlock<T>& block, const Tensor4<T>& f_in, std::span<const Sinogram> y,
                       const SystemMatrix& A, const ObjectiveConfig& cfg) {
    Tensor4<T> s = apply_linear_operator(f_in, y, A, cfg);
    const Tensor4<T> r = block.reg_net.infer(f_in);
    for (size_t j = 0; j < s.data.size(); ++j) s.data[j] += r.data[j];
    Tensor4<T> out = block.newton_net.infer(s);
    for (size_t j = 0; j < out.data.size(); ++j) out.data[j] += f_in.data[j];
    return out;
}

template <typename T>
DnrNet<T>::DnrNet(std::shared_ptr<const SystemMatrix> A, NetworkConfig net, ObjectiveConfig obj)
    : A_(std::move(A)), net_(net), obj_(obj) {
    if (!A_) throw ConfigError("DNR-Net needs a system matrix");
    net_.validate();
    blocks_.reserve(net_.n_blocks);
    for (int k = 0; k < net_.n_blocks; ++k) {
        blocks_.push_back({nn::ResNetOperator<T>(net_.channels, static_cast<T>(net_.slope)),
                           nn::ResNetOperator<T>(net_.channels, static_cast<T>(net_.slope))});
    }
}

template <typename T>
void DnrNet<T>::init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& b : blocks_) {
        b.reg_net.init(rng);
        b.newton_net.init(rng);
        if (net_.zero_init_updates) {
            std::fill(b.newton_net.project.weight.begin(), b.newton_net.project.weight.end(), T(0));
            std::fill(b.newton_net.project.bias.begin(), b.newton_net.project.bias.end(), T(0));
        }
    }
}

template <typename T>
void DnrNet<T>::set_mode(nn::Mode mode) {
    for (auto& b : blocks_) {
        b.reg_net.set_mode(mode);
        b.newton_net.set_mode(mode);
    }
}

template <typename T>
Tensor4<T> DnrNet<T>::forward(const Tensor4<T>& f0, std::span<const Sinogram> y, DnrTape<T>* tape) {
    if (tape) tape->blocks.assign(blocks_.size(), BlockTape<T>{});
    Tensor4<T> f = f0;
    for (size_t k = 0; k < blocks_.size(); ++k)
        f = block_forward(blocks_[k], f, y, *A_, obj_, tape ? &tape->blocks[k] : nullptr);
    return f;
}

template <typename T>
Tensor4<T> DnrNet<T>::backward(const DnrTape<T>& tape, const Tensor4<T>& grad_out) {
    if (tape.blocks.size() != blocks_.size()) throw DimensionError("tape does not match the model");
    Tensor4<T> g = grad_out;
    std::vector<double> in(g.sample_size());
    std::vector<double> res(g.sample_size());
    for (int k = static_cast<int>(blocks_.size()) - 1; k >= 0; --k) {
        const auto& t = tape.blocks[k];
        // out = f + B(L(f) + A(f)): the identity path keeps g, the networks add to it.
        const Tensor4<T> gs = blocks_[k].newton_net.backward(t.newton, g);
        const Tensor4<T> gr = blocks_[k].reg_net.backward(t.reg, gs);
        for (int b = 0; b < g.b; ++b) {
            const auto src = gs.sample(b);
            std::copy(src.begin(), src.end(), in.begin());
            t.operators[b].jacobian_transpose(in, res);
            auto dst = g.sample(b);
            const auto rg = gr.sample(b);
            for (size_t j = 0; j < res.size(); ++j) dst[j] += rg[j] + static_cast<T>(res[j]);
        }
    }
    return g;
}

template <typename T>
Image DnrNet<T>::reconstruct(const Sinogram& y) const {
    validate_counts(y);
    const Image f0 = init_input(y, *A_);
    Tensor4<T> f = to_tensor<T>(std::span<const Image>(&f0, 1));
    for (const auto& b : blocks_) f = block_infer(b, f, std::span<const Sinogram>(&y, 1), *A_, obj_);
    return from_tensor(f, 0, A_->geometry().pixel_size);
}

template <typename T>
void DnrNet<T>::zero_grad() {
    for (auto& b : blocks_) {
        b.reg_net.zero_grad();
        b.newton_net.zero_grad();
    }
}

template <typename T>
void DnrNet<T>::visit(const nn::ParamVisitor<T>& fn) {
    for (size_t k = 0; k < blocks_.size(); ++k) {
        const std::string p = "block" + std::to_string(k);
        blocks_[k].reg_net.visit(p + ".reg", fn);
        blocks_[k].newton_net.visit(p + ".newton", fn);
    }
}

template <typename T>
std::vector<nn::ParamRef<T>> DnrNet<T>::parameters() {
    std::vector<nn::ParamRef<T>> out;
    visit([&out](nn::ParamRef<T> p) {
        if (p.trainable()) out.push_back(std::move(p));
    });
    return out;
}

template <typename T>
Tensor4<T> to_tensor(std::span<const Image> images) {
    if (images.empty()) throw DimensionError("cannot stack an empty image list");
    const int n = images.front().n;
    Tensor4<T> t(static_cast<int>(images.size()), 1, n, n);
    for (size_t b = 0; b < images.size(); ++b) {
        if (images[b].n != n) throw DimensionError("stacked images must share one size");
        auto dst = t.sample(static_cast<int>(b));
        for (size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<T>(images[b].data[j]);
    }
    return t;
}

template <typename T>
Image from_tensor(const Tensor4<T>& t, int sample, double pixel_size) {
    if (t.c != 1 || t.h != t.w) throw DimensionError("expected a (B,1,N,N) tensor");
    Image img(t.h, 0.0, pixel_size);
    const auto src = t.sample(sample);
    for (size_t j = 0; j < src.size(); ++j) img.data[j] = static_cast<double>(src[j]);
    return img;
}

namespace {

nlohmann::json geometry_json(const Geometry& g) {
    return {{"n", g.n}, {"views", g.views}, {"bins", g.bins}, {"arc", g.arc}, {"pixel_size", g.pixel_size}};
}

}  // namespace

template <typename T>
void save_model(const DnrNet<T>& model, const std::filesystem::path& path) {
    nn::Checkpoint ckpt;
    const auto& net = model.network_config();
    ckpt.metadata = {{"model", "dnrnet"},
                     {"geometry", geometry_json(model.system_matrix().geometry())},
                     {"n_blocks", net.n_blocks},
                     {"channels", net.channels},
                     {"slope", net.slope},
                     {"objective", {{"eps_y", model.objective_config().eps_y},
                                    {"include_constant", model.objective_config().include_constant}}}};
    // visit() only exposes views; the model is read, never written, here.
    auto& mutable_model = const_cast<DnrNet<T>&>(model);
    mutable_model.visit([&ckpt](nn::ParamRef<T> p) {
        nn::TensorRecord rec;
        rec.name = p.name;
        rec.shape = p.shape;
        rec.values.reserve(p.value.size());
        for (T v : p.value) rec.values.push_back(static_cast<float>(v));
        ckpt.tensors.push_back(std::move(rec));
    });
    nn::save_checkpoint(path, ckpt);
}

DnrNet<float> load_model(const std::filesystem::path& path) {
    const nn::Checkpoint ckpt = nn::load_checkpoint(path);
    const auto& meta = ckpt.metadata;
    Geometry geom;
    NetworkConfig net;
    ObjectiveConfig obj;
    try {
        if (meta.at("model").get<std::string>() != "dnrnet") throw IoError("checkpoint is not a DNR-Net model");
        const auto& g = meta.at("geometry");
        geom = Geometry::parallel(g.at("n").get<int>(), g.at("views").get<int>(), g.at("bins").get<int>(),
                                  g.at("arc").get<double>(), g.at("pixel_size").get<double>());
        net.n_blocks = meta.at("n_blocks").get<int>();
        net.channels = meta.at("channels").get<int>();
        net.slope = meta.at("slope").get<double>();
        obj.eps_y = meta.at("objective").at("eps_y").get<double>();
        obj.include_constant = meta.at("objective").at("include_constant").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint metadata: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw IoError(std::string("checkpoint metadata: ") + e.what());
    }
    auto A = std::make_shared<const SystemMatrix>(build_system_matrix(geom));
    DnrNet<float> model(A, net, obj);
    size_t expected = 0;
    model.visit([&](nn::ParamRef<float> p) {
        ++expected;
        const auto& rec = ckpt.find(p.name);
        if (rec.shape != p.shape) throw IoError("checkpoint: shape mismatch for " + p.name);
        std::copy(rec.values.begin(), rec.values.end(), p.value.begin());
    });
    if (expected != ckpt.tensors.size()) throw IoError("checkpoint: unexpected extra tensors");
    model.set_mode(nn::Mode::eval);
    return model;
}

#define DNR_INSTANTIATE_DNRNET(T)                                                                              \
    template class DnrNet<T>;                                                                                  \
    template Tensor4<T> apply_linear_operator(const Tensor4<T>&, std::span<const Sinogram>, const SystemMatrix&, \
                                              const ObjectiveConfig&, std::vector<PoissonGradient>*);          \
    template Tensor4<T> block_forward(UnitBlock<T>&, const Tensor4<T>&, std::span<const Sinogram>,             \
                                      const SystemMatrix&, const ObjectiveConfig&, BlockTape<T>*);             \
    template Tensor4<T> block_infer(const UnitBlock<T>&, const Tensor4<T>&, std::span<const Sinogram>,         \
                                    const SystemMatrix&, const ObjectiveConfig&);                              \
    template Tensor4<T> to_tensor(std::span<const Image>);                                                     \
    template Image from_tensor(const Tensor4<T>&, int, double);                                                \
    template void save_model(const DnrNet<T>&, const std::filesystem::path&);

DNR_INSTANTIATE_DNRNET(float)
DNR_INSTANTIATE_DNRNET(double)

}  // namespace dnr

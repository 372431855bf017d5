#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "dnr/nn/resnet.hpp"
#include "dnr/objective.hpp"
#include "dnr/tomo.hpp"

namespace dnr {

struct NetworkConfig {
    int n_blocks = 3;
    int channels = 32;
    double slope = 0.01;
    /// Zero the newton_net projection layers at init so the untrained model returns F0.
    bool zero_init_updates = true;

    void validate() const;
};

/// One unrolled Newton step: regulariser network A and direction network B.
template <typename T>
struct UnitBlock {
    nn::ResNetOperator<T> reg_net;
    nn::ResNetOperator<T> newton_net;
};

template <typename T>
struct BlockTape {
    std::vector<PoissonGradient> operators;  ///< one per batch sample
    nn::ResNetTape<T> reg;
    nn::ResNetTape<T> newton;
};

template <typename T>
struct DnrTape {
    std::vector<BlockTape<T>> blocks;
};

/// Count-matched starting image: -grad U(c * 1 | y) with c = sum(y) / sum(col_sums)
/// (c = 1 when y is all zero).
Image init_input(const Sinogram& y, const SystemMatrix& A, const ObjectiveConfig& cfg = {});

/// Applies -grad U(f_b | y_b) to every sample of a (B,1,N,N) tensor.
template <typename T>
nn::Tensor4<T> apply_linear_operator(const nn::Tensor4<T>& f, std::span<const Sinogram> y, const SystemMatrix& A,
                                     const ObjectiveConfig& cfg, std::vector<PoissonGradient>* cache = nullptr);

/// f_out = f_in + newton_net(-grad U(f_in | y) + reg_net(f_in)).
template <typename T>
nn::Tensor4<T> block_forward(UnitBlock<T>& block, const nn::Tensor4<T>& f_in, std::span<const Sinogram> y,
                             const SystemMatrix& A, const ObjectiveConfig& cfg, BlockTape<T>* tape = nullptr);

/// Eval-mode block without side effects.
template <typename T>
nn::Tensor4<T> block_infer(const UnitBlock<T>& block, const nn::Tensor4<T>& f_in, std::span<const Sinogram> y,
                           const SystemMatrix& A, const ObjectiveConfig& cfg);

template <typename T>
class DnrNet {
public:
    DnrNet(std::shared_ptr<const SystemMatrix> A, NetworkConfig net, ObjectiveConfig obj = {});

    void init(std::uint64_t seed);
    void set_mode(nn::Mode mode);

    const SystemMatrix& system_matrix() const { return *A_; }
    std::shared_ptr<const SystemMatrix> system_matrix_ptr() const { return A_; }
    const NetworkConfig& network_config() const { return net_; }
    const ObjectiveConfig& objective_config() const { return obj_; }
    std::vector<UnitBlock<T>>& blocks() { return blocks_; }
    const std::vector<UnitBlock<T>>& blocks() const { return blocks_; }

    /// Batched forward from precomputed initial images (B,1,N,N).
    nn::Tensor4<T> forward(const nn::Tensor4<T>& f0, std::span<const Sinogram> y, DnrTape<T>* tape = nullptr);

    /// Backpropagates through every block including the linear operators;
    /// accumulates parameter gradients and returns d loss / d f0.
    nn::Tensor4<T> backward(const DnrTape<T>& tape, const nn::Tensor4<T>& grad_out);

    /// Eval-mode reconstruction of one sinogram; the model is not modified.
    Image reconstruct(const Sinogram& y) const;

    void zero_grad();
    void visit(const nn::ParamVisitor<T>& fn);
    std::vector<nn::ParamRef<T>> parameters();

private:
    std::shared_ptr<const SystemMatrix> A_;
    NetworkConfig net_;
    ObjectiveConfig obj_;  ///< guard of the in-block operator; F0 always uses the default
    std::vector<UnitBlock<T>> blocks_;
};

/// Stacks images into a (B,1,N,N) tensor and back.
template <typename T>
nn::Tensor4<T> to_tensor(std::span<const Image> images);
template <typename T>
Image from_tensor(const nn::Tensor4<T>& t, int sample, double pixel_size = 1.0);

/// Checkpoint: manifest at `path`, payload next to it; includes the geometry
/// descriptor and batch-norm running statistics.
template <typename T>
void save_model(const DnrNet<T>& model, const std::filesystem::path& path);
DnrNet<float> load_model(const std::filesystem::path& path);

extern template class DnrNet<float>;
extern template class DnrNet<double>;

}  // namespace dnr

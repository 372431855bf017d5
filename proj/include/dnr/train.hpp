#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dnr/dataset.hpp"
#include "dnr/dnrnet.hpp"

namespace dnr {

struct TrainConfig {
    int epochs = 5;
    int batch_size = 4;
    double split = 0.9;  ///< fraction of samples used for training
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::uint64_t seed = 7;
    int limit = 0;  ///< use only the first `limit` samples when > 0

    void validate() const;
};

struct EpochLoss {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainingReport {
    std::vector<EpochLoss> epochs;
    int train_samples = 0;
    int val_samples = 0;

    /// "epoch,train_mse,val_mse" rows; row 0 is the untrained model.
    std::string to_csv() const;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Mean eval-mode MSE of the model over the given samples.
template <typename T>
double evaluate_mse(const DnrNet<T>& model, const std::vector<const Sample*>& samples);

/// End-to-end training with Adam on the mean per-sample MSE. Validation uses
/// eval mode. Throws DivergenceError when a batch loss is not finite.
template <typename T>
TrainingReport train(DnrNet<T>& model, const Dataset& ds, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {});

}  // namespace dnr

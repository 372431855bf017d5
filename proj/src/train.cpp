#include "dnr/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "dnr/nn/adam.hpp"

namespace dnr {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(split > 0.0 && split < 1.0)) throw ConfigError("train split must lie in (0, 1)");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("Adam betas must lie in [0, 1)");
    if (limit < 0) throw ConfigError("sample limit must be >= 0");
}

std::string TrainingReport::to_csv() const {
    std::ostringstream ss;
    ss << "epoch,train_mse,val_mse\n";
    char buf[96];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.train_mse, e.val_mse);
        ss << buf;
    }
    return ss.str();
}

template <typename T>
double evaluate_mse(const DnrNet<T>& model, const std::vector<const Sample*>& samples) {
    if (samples.empty()) return std::nan("");
    double acc = 0.0;
    for (const Sample* s : samples) {
        const Image rec = model.reconstruct(s->sinogram);
        double sq = 0.0;
        for (size_t j = 0; j < rec.data.size(); ++j) {
            const double d = rec.data[j] - s->truth.data[j];
            sq += d * d;
        }
        acc += sq / static_cast<double>(rec.data.size());
    }
    return acc / static_cast<double>(samples.size());
}

template <typename T>
TrainingReport train(DnrNet<T>& model, const Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (ds.samples.empty()) throw ConfigError("training needs a nonempty dataset");
    if (!ds.geometry.same_as(model.system_matrix().geometry()))
        throw DimensionError("dataset geometry differs from the model geometry");

    const int total = cfg.limit > 0 ? std::min<int>(cfg.limit, static_cast<int>(ds.samples.size()))
                                    : static_cast<int>(ds.samples.size());
    int n_train = std::max(1, static_cast<int>(std::floor(cfg.split * total + 1e-9)));
    if (n_train >= total && total >= 2) n_train = total - 1;
    n_train = std::min(n_train, total);

    std::vector<const Sample*> train_set;
    std::vector<const Sample*> val_set;
    for (int k = 0; k < total; ++k) (k < n_train ? train_set : val_set).push_back(&ds.samples[k]);

    const SystemMatrix& A = model.system_matrix();
    std::vector<Image> f0(train_set.size());
    for (size_t k = 0; k < train_set.size(); ++k) f0[k] = init_input(train_set[k]->sinogram, A);

    TrainingReport report;
    report.train_samples = static_cast<int>(train_set.size());
    report.val_samples = static_cast<int>(val_set.size());

    model.set_mode(nn::Mode::eval);
    EpochLoss initial{0, evaluate_mse(model, train_set), evaluate_mse(model, val_set)};
    report.epochs.push_back(initial);
    if (on_epoch) on_epoch(initial);

    nn::AdamState adam;
    adam.lr = cfg.lr;
    adam.beta1 = cfg.beta1;
    adam.beta2 = cfg.beta2;
    std::mt19937_64 rng(cfg.seed);
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});
    const auto params = model.parameters();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        model.set_mode(nn::Mode::train);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        size_t loss_count = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<Image> inputs;
            std::vector<Image> truths;
            std::vector<Sinogram> sinos;
            for (size_t k = start; k < stop; ++k) {
                inputs.push_back(f0[order[k]]);
                truths.push_back(train_set[order[k]]->truth);
                sinos.push_back(train_set[order[k]]->sinogram);
            }
            const auto x = to_tensor<T>(inputs);
            const auto truth = to_tensor<T>(truths);
            DnrTape<T> tape;
            model.zero_grad();
            const auto pred = model.forward(x, sinos, &tape);
            nn::Tensor4<T> grad(pred.b, pred.c, pred.h, pred.w);
            const double loss = nn::mse_loss<T>(pred.data, truth.data, grad.data);
            if (!std::isfinite(loss))
                throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
            model.backward(tape, grad);
            nn::adam_step(adam, params);
            loss_sum += loss * static_cast<double>(stop - start);
            loss_count += stop - start;
        }
        model.set_mode(nn::Mode::eval);
        EpochLoss row{epoch, loss_sum / static_cast<double>(loss_count), evaluate_mse(model, val_set)};
        report.epochs.push_back(row);
        if (on_epoch) on_epoch(row);
    }
    model.set_mode(nn::Mode::eval);
    return report;
}

template double evaluate_mse(const DnrNet<float>&, const std::vector<const Sample*>&);
template double evaluate_mse(const DnrNet<double>&, const std::vector<const Sample*>&);
template TrainingReport train(DnrNet<float>&, const Dataset&, const TrainConfig&, const EpochCallback&);
template TrainingReport train(DnrNet<double>&, const Dataset&, const TrainConfig&, const EpochCallback&);

}  // namespace dnr

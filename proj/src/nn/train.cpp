#include "sedm/nn/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sedm/log.hpp"
#include "sedm/parallel.hpp"
#include "sedm/rng.hpp"

namespace sedm::nn {

TrainResult train(const std::vector<TrainSample>& dataset,
                  DetectorParams<float>& params, AdamState& adam,
                  const TrainConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.epochs < 1 || cfg.batch_size < 1)
        throw std::invalid_argument("train: epochs and batch_size must be >= 1");
    if (adam.m.size() != learnable_size(params))
        adam = AdamState::zeros(learnable_size(params));

    TrainResult result;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = Rng::derive(cfg.seed, "train-shuffle", epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));

            std::vector<TrainSample> augmented(end - start);
            parallel_for(end - start, cfg.threads, [&](std::size_t k) {
                const std::size_t idx = order[start + k];
                augmented[k] = augment(dataset[idx], cfg.aug,
                                       mix64(cfg.seed) ^ mix64(epoch * 1000003ull + idx),
                                       cfg.border);
            });
            std::vector<TrainSampleView<float>> batch(augmented.size());
            for (std::size_t k = 0; k < augmented.size(); ++k)
                batch[k] = {&augmented[k].image, &augmented[k].labels,
                            &augmented[k].valid};

            std::vector<float> grads;
            const double loss = train_forward_backward(params, batch, cfg.border,
                                                       /*update_running=*/true,
                                                       &grads, cfg.threads);
            if (!std::isfinite(loss))
                throw std::runtime_error(
                    "train: non-finite loss in epoch " + std::to_string(epoch) +
                    ", first sample index " + std::to_string(order[start]));
            adam_step(params, grads, adam, cfg.adam);
            epoch_loss += loss;
            ++batches;
        }
        epoch_loss /= static_cast<double>(batches);
        result.epoch_loss.push_back(epoch_loss);
        if (cfg.log_epochs)
            log_info({{"event", "epoch"},
                      {"epoch", std::to_string(epoch)},
                      {"mean_loss", std::to_string(epoch_loss)}});
    }
    return result;
}

}  // namespace sedm::nn

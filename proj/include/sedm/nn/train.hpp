#pragma once

#include <cstdint>
#include <vector>

#include "sedm/nn/adam.hpp"
#include "sedm/nn/augment.hpp"
#include "sedm/nn/net.hpp"

namespace sedm::nn {

struct TrainConfig {
    int epochs = 40;
    int batch_size = 8;
    AdamConfig adam;
    AugmentConfig aug;
    int border = 4;
    std::uint64_t seed = 0;
    int threads = 1;
    bool log_epochs = false;
};

struct TrainResult {
    std::vector<double> epoch_loss;  // mean loss per epoch
};

/// Minimizes the detector loss over the dataset: seeded per-epoch shuffling,
/// per-sample augmentation, mean-over-batch loss, Adam updates. Aborts with
/// std::runtime_error naming the sample index if the loss turns non-finite.
/// Throws std::invalid_argument on an empty dataset.
TrainResult train(const std::vector<TrainSample>& dataset,
                  DetectorParams<float>& params, AdamState& adam,
                  const TrainConfig& cfg);

}  // namespace sedm::nn

#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "msbt/model.hpp"

namespace msbt {

struct EpochLog {
    size_t epoch = 0;  // 1-based
    double mil = 0.0;
    double tcc = 0.0;
    double total = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
};

// Deterministic per-epoch shuffle of [0, n) derived from the seed.
std::vector<size_t> epoch_order(size_t n, size_t epoch, uint64_t seed);

// One SGD update over the registry, in name order: optional weight decay,
// optional global-norm clipping, optional classical momentum. Parameters
// whose grad buffer is empty are skipped.
void sgd_step(const std::map<std::string, Tensor>& params, const TrainConfig& cfg,
              std::map<std::string, std::vector<double>>& momentum);

// Mini-batch SGD over the joint loss. Per-batch loss is the mean over the
// batch's videos of MIL + lambda*TCC; the TCC term is skipped entirely when
// lambda is 0. With threads > 1, videos are split round-robin over worker
// model replicas and gradients merge in worker order, so results are
// bit-reproducible for a fixed thread count. The log holds per-video means
// for each epoch.
TrainResult train(Model& model, const std::vector<VideoSample>& dataset,
                  const TrainConfig& cfg, std::ostream* progress = nullptr);

// "epoch,mil,tcc,total" with full double precision.
std::string loss_log_csv(const std::vector<EpochLog>& log);

}  // namespace msbt

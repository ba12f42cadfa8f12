#include "msbt/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <thread>

#include "msbt/error.hpp"
#include "msbt/kernels.hpp"
#include "msbt/losses.hpp"
#include "msbt/ops.hpp"
#include "msbt/rng.hpp"

namespace msbt {
namespace {

struct VideoLoss {
    double mil = 0.0;
    double tcc = 0.0;
    double total = 0.0;
};

// Forward + backward for one video; the backward seed folds in the batch mean.
VideoLoss video_pass(const Model& model, const VideoSample& sample, double grad_seed) {
    const ModelConfig& mc = model.config();
    ForwardResult fwd = model.forward(sample);
    Tensor mil = mil_topk_loss(fwd.scores, sample.label_or_throw(), mc.topk);
    VideoLoss out;
    out.mil = mil.scalar();
    Tensor total = mil;
    if (mc.lambda > 0.0) {
        Tensor tcc = tcc_loss(fwd.weighted_pairs, mc.tau);
        out.tcc = tcc.scalar();
        total = add(mil, mul_scalar(tcc, mc.lambda));
    }
    out.total = total.scalar();
    total.backward(grad_seed);
    return out;
}

}  // namespace

std::vector<size_t> epoch_order(size_t n, size_t epoch, uint64_t seed) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    Rng rng(seed * 0x9E3779B97F4A7C15ULL + epoch + 1);
    for (size_t i = n; i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i - 1)));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

void sgd_step(const std::map<std::string, Tensor>& params, const TrainConfig& cfg,
              std::map<std::string, std::vector<double>>& momentum) {
    double scale = 1.0;
    if (cfg.grad_clip > 0.0) {
        double norm2 = 0.0;
        for (const auto& [name, t] : params) {
            const auto& g = t.grad();
            const auto& p = t.values();
            for (size_t i = 0; i < g.size(); ++i) {
                const double gi = g[i] + cfg.weight_decay * p[i];
                norm2 += gi * gi;
            }
        }
        const double norm = std::sqrt(norm2);
        if (norm > cfg.grad_clip) scale = cfg.grad_clip / norm;
    }

    for (const auto& [name, t] : params) {
        const auto& g = t.grad();
        if (g.empty()) continue;
        Tensor param = t;
        auto& p = param.leaf_values();
        if (cfg.momentum > 0.0) {
            auto& buf = momentum[name];
            if (buf.size() != p.size()) buf.assign(p.size(), 0.0);
            for (size_t i = 0; i < p.size(); ++i) {
                const double gi = scale * (g[i] + cfg.weight_decay * p[i]);
                buf[i] = cfg.momentum * buf[i] + gi;
                p[i] -= cfg.lr * buf[i];
            }
        } else if (cfg.weight_decay > 0.0 || scale != 1.0) {
            for (size_t i = 0; i < p.size(); ++i) {
                p[i] -= cfg.lr * scale * (g[i] + cfg.weight_decay * p[i]);
            }
        } else {
            kernels::active().axpy(-cfg.lr, g.data(), p.data(), p.size());
        }
    }
}

TrainResult train(Model& model, const std::vector<VideoSample>& dataset,
                  const TrainConfig& cfg, std::ostream* progress) {
    cfg.validate();
    if (dataset.empty()) throw ContractError("train: dataset is empty");
    size_t pos = 0, neg = 0;
    for (const auto& s : dataset) {
        (s.label_or_throw() == 1 ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0) {
        std::fprintf(stderr,
                     "warning: training set has a single class (%zu positive, %zu negative); "
                     "the MIL loss is degenerate but defined\n",
                     pos, neg);
    }

    const size_t n = dataset.size();
    const size_t workers = std::min(cfg.threads, n);
    std::vector<Model> replicas;
    if (workers > 1) {
        replicas.reserve(workers);
        for (size_t w = 0; w < workers; ++w) replicas.push_back(model.clone());
    }
    std::map<std::string, std::vector<double>> momentum;

    TrainResult result;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(n, epoch, cfg.seed);
        double mil_sum = 0.0, tcc_sum = 0.0, total_sum = 0.0;

        for (size_t start = 0; start < n; start += cfg.batch_size) {
            const size_t batch = std::min(cfg.batch_size, n - start);
            const double seed_grad = 1.0 / static_cast<double>(batch);
            std::vector<VideoLoss> losses(batch);

            if (workers <= 1) {
                model.zero_grad();
                for (size_t i = 0; i < batch; ++i) {
                    losses[i] = video_pass(model, dataset[order[start + i]], seed_grad);
                }
            } else {
                for (auto& r : replicas) r.zero_grad();
                std::vector<std::thread> pool;
                pool.reserve(workers);
                for (size_t w = 0; w < workers; ++w) {
                    pool.emplace_back([&, w] {
                        for (size_t i = w; i < batch; i += workers) {
                            losses[i] =
                                video_pass(replicas[w], dataset[order[start + i]], seed_grad);
                        }
                    });
                }
                for (auto& t : pool) t.join();

                // Merge replica gradients into the master in worker order;
                // the result does not depend on thread timing.
                model.zero_grad();
                for (auto& [name, mt] : model.parameters()) {
                    auto master = mt;
                    master.node()->ensure_grad();
                    for (size_t w = 0; w < workers; ++w) {
                        const auto& g = replicas[w].parameters().at(name).grad();
                        if (!g.empty()) {
                            kernels::active().acc(g.data(), master.node()->grad.data(),
                                                  g.size());
                        }
                    }
                }
            }

            for (const auto& l : losses) {
                mil_sum += l.mil;
                tcc_sum += l.tcc;
                total_sum += l.total;
            }
            sgd_step(model.parameters(), cfg, momentum);
            if (workers > 1) {
                for (auto& r : replicas) r.copy_values_from(model);
            }
        }

        EpochLog log;
        log.epoch = epoch + 1;
        log.mil = mil_sum / static_cast<double>(n);
        log.tcc = tcc_sum / static_cast<double>(n);
        log.total = total_sum / static_cast<double>(n);
        result.log.push_back(log);
        if (progress) {
            char line[160];
            std::snprintf(line, sizeof(line), "epoch %zu/%zu mil=%.6f tcc=%.6f total=%.6f\n",
                          log.epoch, cfg.epochs, log.mil, log.tcc, log.total);
            *progress << line;
            progress->flush();
        }
    }
    return result;
}

std::string loss_log_csv(const std::vector<EpochLog>& log) {
    std::string out = "epoch,mil,tcc,total\n";
    char buf[160];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.mil, e.tcc,
                      e.total);
        out += buf;
    }
    return out;
}

}  // namespace msbt

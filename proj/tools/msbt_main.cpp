// Command-line surface: train, eval, predict, gradcheck, synth.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "msbt/checkpoint.hpp"
#include "msbt/data.hpp"
#include "msbt/error.hpp"
#include "msbt/gradcheck.hpp"
#include "msbt/kernels.hpp"
#include "msbt/losses.hpp"
#include "msbt/metrics.hpp"
#include "msbt/ops.hpp"
#include "msbt/trainer.hpp"

namespace fs = std::filesystem;
using namespace msbt;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string preset = "default";
    std::string manifest;
    std::string checkpoint;
    std::string out_dir;
    std::string modalities;
    uint64_t seed = 0;
    double lambda = -1.0;
    long topk = -1;
    bool no_cross_transformer = false;
    bool no_weighting = false;
    long fixed_tokens = -1;
    long bottleneck_n1 = -1;
    long layers_msbt = -1;
    long epochs = -1;
    long batch_size = -1;
    double lr = -1.0;
    long threads = -1;
    double momentum = -1.0;
    double weight_decay = -1.0;
    bool seed_given = false;
};

void add_model_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "key = value config file");
    cmd->add_option("--preset", f.preset, "config preset: default|reduced|toy");
    cmd->add_option("--modalities", f.modalities, "modalities to use, e.g. r,f,a");
    cmd->add_option("--lambda", f.lambda, "TCC weight in the joint loss");
    cmd->add_option("--topk", f.topk, "top-K count of the MIL loss");
    cmd->add_flag("--no-cross-transformer", f.no_cross_transformer,
                  "disable the layer-to-layer token carry");
    cmd->add_flag("--no-weighting", f.no_weighting, "disable bottleneck token-based weighting");
    cmd->add_option("--fixed-tokens", f.fixed_tokens,
                    "use a fixed bottleneck token count instead of halving");
    cmd->add_option("--bottleneck-n1", f.bottleneck_n1, "first-layer bottleneck token count");
    cmd->add_option("--layers-msbt", f.layers_msbt, "fusion layer count");
}

void add_train_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--seed", f.seed, "deterministic seed")->each([&](const std::string&) {
        f.seed_given = true;
    });
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--batch-size", f.batch_size, "videos per SGD step");
    cmd->add_option("--lr", f.lr, "learning rate");
    cmd->add_option("--threads", f.threads, "worker threads per batch");
    cmd->add_option("--momentum", f.momentum, "SGD momentum (default 0)");
    cmd->add_option("--weight-decay", f.weight_decay, "L2 penalty (default 0)");
}

RunConfig resolve_config(const CommonFlags& f) {
    RunConfig cfg = preset_config(f.preset);
    if (!f.config_path.empty()) cfg = load_config_file(f.config_path, cfg);
    if (!f.modalities.empty()) cfg.model.modalities = parse_modalities(f.modalities);
    if (f.lambda >= 0.0) cfg.model.lambda = f.lambda;
    if (f.topk > 0) cfg.model.topk = static_cast<size_t>(f.topk);
    if (f.no_cross_transformer) cfg.model.cross_transformer = false;
    if (f.no_weighting) cfg.model.weighting = false;
    if (f.fixed_tokens >= 0) cfg.model.fixed_tokens = static_cast<size_t>(f.fixed_tokens);
    if (f.bottleneck_n1 > 0) cfg.model.n_bt1 = static_cast<size_t>(f.bottleneck_n1);
    if (f.layers_msbt > 0) cfg.model.l_m = static_cast<size_t>(f.layers_msbt);
    if (f.seed_given) cfg.train.seed = f.seed;
    if (f.epochs > 0) cfg.train.epochs = static_cast<size_t>(f.epochs);
    if (f.batch_size > 0) cfg.train.batch_size = static_cast<size_t>(f.batch_size);
    if (f.lr > 0.0) cfg.train.lr = f.lr;
    if (f.threads > 0) cfg.train.threads = static_cast<size_t>(f.threads);
    if (f.momentum >= 0.0) cfg.train.momentum = f.momentum;
    if (f.weight_decay >= 0.0) cfg.train.weight_decay = f.weight_decay;
    return cfg;
}

// Fill input dims from the loaded manifest, verifying any explicit config.
void adopt_dims(ModelConfig& mc, const Manifest& manifest) {
    for (Modality m : mc.modalities) {
        auto it = manifest.dims.find(m);
        if (it == manifest.dims.end()) {
            throw ConfigError(std::string("manifest provides no '") + modality_letter(m) +
                              "' features but the model requires them");
        }
        auto have = mc.input_dims.find(m);
        if (have != mc.input_dims.end() && have->second != it->second) {
            throw ConfigError(std::string("configured dim_") +
                              static_cast<char>(std::tolower(modality_letter(m))) + "=" +
                              std::to_string(have->second) + " but the data has width " +
                              std::to_string(it->second));
        }
        mc.input_dims[m] = it->second;
    }
}

void check_modalities_match(const Model& model, const CommonFlags& f) {
    if (f.modalities.empty()) return;
    auto requested = parse_modalities(f.modalities);
    if (requested != model.config().modalities) {
        throw ConfigError("checkpoint was trained with modalities '" +
                          modalities_str(model.config().modalities) + "' but '" +
                          modalities_str(requested) + "' were requested");
    }
}

int cmd_train(const CommonFlags& f) {
    RunConfig cfg = resolve_config(f);
    Dataset ds = load_manifest(f.manifest);
    if (ds.samples.empty()) throw ContractError("train: manifest is empty");
    adopt_dims(cfg.model, ds.manifest);

    Model model(cfg.model, cfg.train.seed);
    std::fprintf(stderr, "training on %zu videos, %zu parameters, kernels=%s\n",
                 ds.samples.size(), model.parameter_count(), kernels::active().name);
    TrainResult result = train(model, ds.samples, cfg.train, &std::cerr);

    fs::create_directories(f.out_dir);
    const std::string ckpt = (fs::path(f.out_dir) / "checkpoint.msbc").string();
    save_checkpoint(ckpt, model, cfg.train.epochs, cfg.train.seed);
    const std::string loss_csv = (fs::path(f.out_dir) / "loss.csv").string();
    std::ofstream(loss_csv) << loss_log_csv(result.log);
    std::printf("checkpoint: %s\nloss log: %s\nfinal total loss: %.6f\n", ckpt.c_str(),
                loss_csv.c_str(), result.log.back().total);
    return 0;
}

int cmd_eval(const CommonFlags& f) {
    auto loaded = load_checkpoint(f.checkpoint);
    check_modalities_match(loaded.model, f);
    Dataset ds = load_manifest(f.manifest);
    if (ds.samples.empty()) throw ContractError("eval: manifest is empty");

    EvalReport report = evaluate_samples(loaded.model, ds.samples, f.out_dir);
    nlohmann::json j = {
        {"frame_ap", report.frame_ap},
        {"num_frames", report.num_frames},
        {"num_positive_frames", report.num_positive_frames},
        {"per_video_csv", report.per_video_csv},
    };
    if (!f.out_dir.empty()) {
        std::ofstream((fs::path(f.out_dir) / "report.json").string()) << j.dump(2) << "\n";
    }
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

int cmd_predict(const CommonFlags& f, size_t frames_per_snippet) {
    auto loaded = load_checkpoint(f.checkpoint);
    check_modalities_match(loaded.model, f);
    Dataset ds = load_manifest(f.manifest);
    if (ds.samples.empty()) throw ContractError("predict: manifest is empty");
    fs::create_directories(f.out_dir);

    const size_t fps =
        ds.manifest.frames_per_snippet ? ds.manifest.frames_per_snippet : frames_per_snippet;
    for (const auto& sample : ds.samples) {
        ForwardResult fwd = loaded.model.forward(sample);
        const auto frames = expand_scores_to_frames(fwd.scores.values(), fps);
        const std::string path =
            (fs::path(f.out_dir) / (sample.id + "_scores.csv")).string();
        std::ofstream out(path);
        if (!out) throw IoError("cannot write '" + path + "'");
        out << "frame_index,score\n";
        char buf[64];
        for (size_t i = 0; i < frames.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i, frames[i]);
            out << buf;
        }
        std::printf("%s\n", path.c_str());
    }
    return 0;
}

// Finite-difference suites: primitive ops at 1e-4, the toy end-to-end model
// at 1e-3.
int cmd_gradcheck(const std::string& which, double tol_ops, double tol_model) {
    Rng rng(20240517);
    auto rand_t = [&](Shape shape, bool rg = true, double lo = -1.0, double hi = 1.0) {
        std::vector<double> v(numel_of(shape));
        for (auto& x : v) x = rng.uniform(lo, hi);
        return Tensor(std::move(shape), std::move(v), rg);
    };

    bool all_pass = true;
    double worst = 0.0;
    auto report = [&](const std::string& name, const GradCheckReport& rep) {
        std::printf("%-24s max_rel_err=%.3e %s\n", name.c_str(), rep.max_rel_err,
                    rep.pass ? "PASS" : "FAIL");
        all_pass &= rep.pass;
        worst = std::max(worst, rep.max_rel_err);
    };

    if (which == "ops" || which == "all") {
        {
            Tensor a = rand_t({3, 4}), b = rand_t({4, 2});
            report("matmul", grad_check([&] { return sum(matmul(a, b)); }, {a, b}, 1e-5, tol_ops));
        }
        {
            Tensor x = rand_t({3, 5}), w = rand_t({3, 5}, false);
            report("softmax_rows",
                   grad_check([&] { return sum(mul(softmax_rows(x), w)); }, {x}, 1e-5, tol_ops));
        }
        {
            Tensor x = rand_t({3, 6}), g = rand_t({6}, true, 0.5, 1.5), be = rand_t({6});
            Tensor w = rand_t({3, 6}, false);
            report("layernorm", grad_check([&] { return sum(mul(layernorm(x, g, be), w)); },
                                           {x, g, be}, 1e-5, tol_ops));
        }
        {
            Tensor x = rand_t({2, 4}), y = rand_t({2, 4}), w = rand_t({2, 4}, false);
            report("add_mul", grad_check([&] { return sum(mul(mul(add(x, y), x), w)); }, {x, y},
                                         1e-5, tol_ops));
        }
        {
            Tensor x = rand_t({2, 4}), w = rand_t({2, 4}, false);
            report("gelu", grad_check([&] { return sum(mul(gelu(x), w)); }, {x}, 1e-5, tol_ops));
            Tensor p = rand_t({2, 4}, true, 0.2, 2.0);
            report("log_exp", grad_check([&] { return sum(mul(log(exp(p)), w)); }, {p}, 1e-5,
                                         tol_ops));
        }
        {
            Tensor u = rand_t({5}), v = rand_t({5});
            report("cosine_similarity",
                   grad_check([&] { return cosine_similarity(u, v); }, {u, v}, 1e-5, tol_ops));
        }
        {
            Tensor u = rand_t({3, 4}), v = rand_t({2, 4}), w = rand_t({3, 2}, false);
            report("cosine_matrix",
                   grad_check([&] { return sum(mul(cosine_matrix(u, v), w)); }, {u, v}, 1e-5,
                              tol_ops));
        }
        {
            std::vector<Tensor> pairs = {rand_t({3, 4}), rand_t({3, 4})};
            report("tcc_loss",
                   grad_check([&] { return tcc_loss(pairs, 0.5); }, pairs, 1e-5, tol_ops));
        }
        {
            Tensor s = rand_t({5}, true, 0.2, 0.8);
            report("mil_topk_loss",
                   grad_check([&] { return mil_topk_loss(s, 1, 3); }, {s}, 1e-5, tol_ops));
        }
        {
            auto layer = TransformerLayerParams::init(4, 2, rng);
            Tensor z = rand_t({3, 4}), w = rand_t({3, 4}, false);
            std::vector<Tensor> leaves = {z};
            for (auto& [n, t] : layer.named("l")) leaves.push_back(t);
            report("transformer_layer",
                   grad_check([&] { return sum(mul(transformer_layer(z, layer), w)); }, leaves,
                              1e-5, tol_ops));
            Tensor x = rand_t({2, 4}), y = rand_t({3, 4}), w2 = rand_t({2, 4}, false);
            report("cross_transformer",
                   grad_check([&] { return sum(mul(cross_transformer(x, y, layer), w2)); },
                              {x, y}, 1e-5, tol_ops));
        }
    }

    if (which == "toy" || which == "all") {
        ModelConfig cfg = toy_model_config();
        cfg.input_dims = {{Modality::Rgb, 6}, {Modality::Flow, 5}};
        Model model(cfg, 9001);
        VideoSample s;
        s.id = "gradcheck_toy";
        for (Modality m : cfg.modalities) {
            const size_t d = cfg.input_dims.at(m);
            std::vector<double> v(4 * d);
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
            s.features.emplace_back(m, Tensor({4, d}, std::move(v)));
        }
        std::vector<Tensor> leaves;
        for (const auto& [name, t] : model.parameters()) leaves.push_back(t);
        auto rep = grad_check(
            [&] {
                ForwardResult fwd = model.forward(s);
                Tensor mil = mil_topk_loss(fwd.scores, 1, cfg.topk);
                Tensor tcc = tcc_loss(fwd.weighted_pairs, cfg.tau);
                return total_loss(mil, tcc, cfg.lambda);
            },
            leaves, 1e-5, tol_model);
        report("full_model_toy", rep);
    }

    std::printf("max relative error: %.3e\n", worst);
    return all_pass ? 0 : 1;
}

int cmd_synth(const SynthConfig& cfg, const std::string& out_dir) {
    const std::string manifest = synth_to_dir(cfg, out_dir);
    std::printf("%s\n", manifest.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal anomaly scoring with bottleneck-token fusion"};
    app.require_subcommand(1);

    CommonFlags f;
    SynthConfig synth_cfg;
    size_t predict_fps = 16;
    std::string gradcheck_preset = "all";
    double gradcheck_tol_ops = 1e-4;
    double gradcheck_tol_model = 1e-3;

    auto* train_cmd = app.add_subcommand("train", "train from a manifest");
    train_cmd->add_option("--manifest", f.manifest, "training manifest")->required();
    train_cmd->add_option("--out", f.out_dir, "output directory")->required();
    add_model_flags(train_cmd, f);
    add_train_flags(train_cmd, f);

    auto* eval_cmd = app.add_subcommand("eval", "frame-level AP of a checkpoint");
    eval_cmd->add_option("--checkpoint", f.checkpoint, "trained checkpoint")->required();
    eval_cmd->add_option("--manifest", f.manifest, "test manifest with frame labels")
        ->required();
    eval_cmd->add_option("--out", f.out_dir, "directory for report.json and score CSVs");
    eval_cmd->add_option("--modalities", f.modalities, "expected modalities (sanity check)");

    auto* predict_cmd = app.add_subcommand("predict", "score videos with a checkpoint");
    predict_cmd->add_option("--checkpoint", f.checkpoint, "trained checkpoint")->required();
    predict_cmd->add_option("--manifest", f.manifest, "manifest of feature files")->required();
    predict_cmd->add_option("--out", f.out_dir, "output directory")->required();
    predict_cmd->add_option("--modalities", f.modalities, "expected modalities (sanity check)");
    predict_cmd->add_option("--frames-per-snippet", predict_fps,
                            "frame expansion when no labels exist");

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suites");
    grad_cmd->add_option("--preset", gradcheck_preset, "ops|toy|all");
    grad_cmd->add_option("--tol", gradcheck_tol_model, "tolerance for the full-model check");

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_cmd->add_option("--out", f.out_dir, "output directory")->required();
    synth_cmd->add_option("--seed", synth_cfg.seed, "generator seed");
    synth_cmd->add_option("--num-videos", synth_cfg.num_videos, "video count");
    synth_cmd->add_option("--t-min", synth_cfg.t_min, "min snippets per video");
    synth_cmd->add_option("--t-max", synth_cfg.t_max, "max snippets per video");
    size_t dim_r = 32, dim_f = 32, dim_a = 16;
    synth_cmd->add_option("--dim-r", dim_r, "rgb feature width");
    synth_cmd->add_option("--dim-f", dim_f, "flow feature width");
    synth_cmd->add_option("--dim-a", dim_a, "audio feature width");
    synth_cmd->add_option("--anomaly-rate", synth_cfg.anomaly_rate, "fraction of anomalous videos");
    synth_cmd->add_option("--event-min", synth_cfg.event_min, "min event length (snippets)");
    synth_cmd->add_option("--event-max", synth_cfg.event_max, "max event length (snippets)");
    synth_cmd->add_option("--signal", synth_cfg.signal, "event bump strength");
    synth_cmd->add_option("--async-offset", synth_cfg.async_offset,
                          "audio lag behind the visual event (snippets)");
    synth_cmd->add_option("--frames-per-snippet", synth_cfg.frames_per_snippet,
                          "frames represented by one snippet");
    synth_cmd->add_flag("!--no-center", synth_cfg.center,
                        "skip per-video mean centering of features");
    synth_cmd->add_flag("!--no-distractors", synth_cfg.distractors,
                        "skip unaligned activity in normal videos");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(train_cmd)) return cmd_train(f);
        if (app.got_subcommand(eval_cmd)) return cmd_eval(f);
        if (app.got_subcommand(predict_cmd)) return cmd_predict(f, predict_fps);
        if (app.got_subcommand(grad_cmd)) {
            return cmd_gradcheck(gradcheck_preset, gradcheck_tol_ops, gradcheck_tol_model);
        }
        if (app.got_subcommand(synth_cmd)) {
            synth_cfg.dims = {{Modality::Rgb, dim_r}, {Modality::Flow, dim_f},
                              {Modality::Audio, dim_a}};
            return cmd_synth(synth_cfg, f.out_dir);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 2;
    }
    return 1;
}

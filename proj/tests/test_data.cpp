#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "msbt/data.hpp"
#include "msbt/error.hpp"
#include "msbt/rng.hpp"

using namespace msbt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("msbt_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("feature file round-trips bit-exactly") {
    TempDir dir;
    Rng rng(1);
    std::vector<double> vals(3 * 5);
    for (auto& v : vals) v = static_cast<double>(static_cast<float>(rng.uniform(-2, 2)));
    write_feature_file(dir.file("a.msbf"), 3, 5, vals);
    Tensor back = read_feature_file(dir.file("a.msbf"));
    CHECK(back.shape() == Shape{3, 5});
    CHECK(back.values() == vals);
}

TEST_CASE("feature file rejects bad magic, version, truncation") {
    TempDir dir;
    write_feature_file(dir.file("a.msbf"), 2, 2, {1, 2, 3, 4});

    auto corrupt = [&](const std::string& name, size_t offset, char byte, bool truncate) {
        std::ifstream in(dir.file("a.msbf"), std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        if (truncate) {
            bytes.resize(bytes.size() - 3);
        } else {
            bytes[offset] = byte;
        }
        std::ofstream out(dir.file(name), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    };
    corrupt("bad_magic.msbf", 0, 'X', false);
    corrupt("bad_version.msbf", 4, 9, false);
    corrupt("short.msbf", 0, 0, true);
    CHECK_THROWS_AS(read_feature_file(dir.file("bad_magic.msbf")), IoError);
    CHECK_THROWS_AS(read_feature_file(dir.file("bad_version.msbf")), IoError);
    CHECK_THROWS_AS(read_feature_file(dir.file("short.msbf")), IoError);
    CHECK_THROWS_AS(read_feature_file(dir.file("missing.msbf")), IoError);
}

TEST_CASE("label file round-trip and validation") {
    TempDir dir;
    std::vector<uint8_t> labels = {0, 1, 1, 0, 1};
    write_label_file(dir.file("l.txt"), labels);
    CHECK(read_label_file(dir.file("l.txt")) == labels);

    std::ofstream bad(dir.file("bad.txt"));
    bad << "0102\n";
    bad.close();
    CHECK_THROWS_AS(read_label_file(dir.file("bad.txt")), IoError);
}

TEST_CASE("empty manifest loads as an empty dataset") {
    TempDir dir;
    std::ofstream out(dir.file("m.tsv"));
    out << "# only comments here\n\n";
    out.close();
    Dataset ds = load_manifest(dir.file("m.tsv"));
    CHECK(ds.samples.empty());
    CHECK(ds.manifest.entries.empty());
}

TEST_CASE("write_sample + manifest round-trips features bit-exactly") {
    TempDir dir;
    SynthConfig cfg;
    cfg.num_videos = 3;
    cfg.t_min = cfg.t_max = 8;
    cfg.event_min = 2;
    cfg.event_max = 3;
    cfg.frames_per_snippet = 4;
    cfg.seed = 99;
    auto samples = generate_synthetic(cfg);

    std::vector<ManifestEntry> entries;
    for (const auto& s : samples) entries.push_back(write_sample(s, dir.path.string()));
    write_manifest(dir.file("manifest.tsv"), entries);

    Dataset ds = load_manifest(dir.file("manifest.tsv"));
    REQUIRE(ds.samples.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(ds.samples[i].id == samples[i].id);
        CHECK(ds.samples[i].video_label == samples[i].video_label);
        CHECK(ds.samples[i].frame_labels == samples[i].frame_labels);
        for (size_t m = 0; m < samples[i].features.size(); ++m) {
            CHECK(ds.samples[i].features[m].second.values() ==
                  samples[i].features[m].second.values());
        }
    }
    CHECK(ds.manifest.frames_per_snippet == 4);
}

TEST_CASE("manifest T mismatch across modalities names the video id") {
    TempDir dir;
    write_feature_file(dir.file("v_r.msbf"), 12, 4, std::vector<double>(48, 0.5));
    write_feature_file(dir.file("v_a.msbf"), 10, 4, std::vector<double>(40, 0.5));
    std::ofstream out(dir.file("m.tsv"));
    out << "vid_weird\tv_r.msbf\t-\tv_a.msbf\t1\n";
    out.close();
    try {
        load_manifest(dir.file("m.tsv"));
        FAIL("expected IoError");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("vid_weird") != std::string::npos);
        CHECK(msg.find("T=10") != std::string::npos);
        CHECK(msg.find("T=12") != std::string::npos);
    }
}

TEST_CASE("manifest rejects duplicate ids and missing files with context") {
    TempDir dir;
    write_feature_file(dir.file("v_r.msbf"), 4, 2, std::vector<double>(8, 0.0));
    {
        std::ofstream out(dir.file("dup.tsv"));
        out << "v\tv_r.msbf\t-\t-\t0\n";
        out << "v\tv_r.msbf\t-\t-\t0\n";
    }
    CHECK_THROWS_AS(load_manifest(dir.file("dup.tsv")), IoError);
    {
        std::ofstream out(dir.file("gone.tsv"));
        out << "ghost\tnope.msbf\t-\t-\t0\n";
    }
    try {
        load_manifest(dir.file("gone.tsv"));
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("ghost") != std::string::npos);
    }
}

TEST_CASE("frame label count must be a multiple of T") {
    TempDir dir;
    write_feature_file(dir.file("v_r.msbf"), 4, 2, std::vector<double>(8, 0.0));
    write_label_file(dir.file("v_l.txt"), std::vector<uint8_t>(10, 1));
    std::ofstream out(dir.file("m.tsv"));
    out << "vid_x\tv_r.msbf\t-\t-\tv_l.txt\n";
    out.close();
    CHECK_THROWS_AS(load_manifest(dir.file("m.tsv")), IoError);
}

TEST_CASE("synthetic generation is a pure function of the config") {
    SynthConfig cfg;
    cfg.num_videos = 6;
    cfg.t_min = 10;
    cfg.t_max = 20;
    cfg.anomaly_rate = 0.5;
    cfg.event_min = 3;
    cfg.event_max = 5;
    cfg.async_offset = 1;
    cfg.seed = 1234;
    auto a = generate_synthetic(cfg);
    auto b = generate_synthetic(cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].frame_labels == b[i].frame_labels);
        for (size_t m = 0; m < a[i].features.size(); ++m) {
            CHECK(a[i].features[m].second.values() == b[i].features[m].second.values());
        }
    }
}

TEST_CASE("anomaly rate zero means all labels zero") {
    SynthConfig cfg;
    cfg.num_videos = 5;
    cfg.anomaly_rate = 0.0;
    cfg.seed = 7;
    for (const auto& s : generate_synthetic(cfg)) {
        CHECK(s.video_label == 0);
        for (uint8_t l : s.frame_labels) CHECK(l == 0);
    }
}

TEST_CASE("frame labels are consistent with planted events, audio lags by the offset") {
    SynthConfig cfg;
    cfg.num_videos = 8;
    cfg.t_min = cfg.t_max = 16;
    cfg.anomaly_rate = 0.5;
    cfg.event_min = 5;
    cfg.event_max = 7;
    cfg.signal = 4.0;
    cfg.async_offset = 2;
    cfg.frames_per_snippet = 2;
    cfg.distractors = false;  // alignment semantics are cleanest without clutter
    cfg.seed = 31;

    auto samples = generate_synthetic(cfg);
    size_t n_anom = 0;
    for (const auto& s : samples) {
        const size_t t = s.snippet_count();
        REQUIRE(s.frame_labels.size() == t * cfg.frames_per_snippet);

        // Recover the per-snippet bump from the mean of the signal dims.
        // After per-video centering, bump snippets sit near
        // signal*(1 - len/T) ~ +2.3 and background near -signal*len/T ~ -1.5,
        // so a 0.5 threshold separates them despite N(0,1) noise.
        auto sig_mean = [&](Modality m, size_t snippet) {
            const Tensor& f = s.features_for(m);
            const size_t d = f.cols();
            const size_t sig_dims = std::min<size_t>(8, d);
            double mean = 0.0;
            for (size_t j = 0; j < sig_dims; ++j) mean += f.value_at(snippet * d + j);
            return mean / static_cast<double>(sig_dims);
        };
        auto bumped = [&](Modality m, size_t snippet) { return sig_mean(m, snippet) > 0.5; };
        if (s.video_label == 1) {
            ++n_anom;
            for (size_t snippet = 0; snippet < t; ++snippet) {
                const bool visual = s.frame_labels[snippet * cfg.frames_per_snippet] != 0;
                CHECK(bumped(Modality::Rgb, snippet) == visual);
                CHECK(bumped(Modality::Flow, snippet) == visual);
                // Audio is the visual window shifted right by the offset.
                const bool audio_expected =
                    snippet >= cfg.async_offset &&
                    s.frame_labels[(snippet - cfg.async_offset) * cfg.frames_per_snippet] != 0;
                CHECK(bumped(Modality::Audio, snippet) == audio_expected);
            }
        } else {
            // Pure noise stays far below the planted bump's ~+2.3 level.
            for (size_t snippet = 0; snippet < t; ++snippet) {
                CHECK(sig_mean(Modality::Rgb, snippet) < 1.8);
                CHECK(s.frame_labels[snippet * cfg.frames_per_snippet] == 0);
            }
        }
    }
    CHECK(n_anom == 4);
}

TEST_CASE("clutter bursts never align across all modalities off the labeled event") {
    SynthConfig cfg;
    cfg.num_videos = 12;
    cfg.t_min = 15;
    cfg.t_max = 18;
    cfg.anomaly_rate = 0.5;
    cfg.event_min = 10;
    cfg.event_max = 12;
    cfg.signal = 4.0;
    cfg.frames_per_snippet = 2;
    cfg.distractors = true;
    cfg.center = false;  // keep raw amplitudes for unambiguous thresholding
    cfg.seed = 77;

    for (const auto& s : generate_synthetic(cfg)) {
        const size_t t = s.snippet_count();
        auto bumped = [&](Modality m, size_t snippet) {
            const Tensor& f = s.features_for(m);
            const size_t d = f.cols();
            const size_t sig_dims = std::min<size_t>(8, d);
            double mean = 0.0;
            for (size_t j = 0; j < sig_dims; ++j) mean += f.value_at(snippet * d + j);
            return mean / static_cast<double>(sig_dims) > 2.0;
        };
        size_t bursts_seen = 0;
        for (size_t snippet = 0; snippet < t; ++snippet) {
            const bool labeled = s.frame_labels[snippet * cfg.frames_per_snippet] != 0;
            const bool all_three = bumped(Modality::Rgb, snippet) &&
                                   bumped(Modality::Flow, snippet) &&
                                   bumped(Modality::Audio, snippet);
            if (all_three) CHECK(labeled);
            if (labeled) CHECK(all_three);
            bursts_seen += bumped(Modality::Rgb, snippet) && !labeled;
        }
        if (s.video_label == 0) CHECK(bursts_seen > 0);  // clutter exists in normals
    }
}

TEST_CASE("synth config validation") {
    SynthConfig cfg;
    cfg.async_offset = cfg.event_min;  // offset must stay below event length
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    SynthConfig cfg2;
    cfg2.event_max = cfg2.t_min + 1;
    CHECK_THROWS_AS(cfg2.validate(), ConfigError);
}

TEST_CASE("expand_scores_to_frames") {
    CHECK(expand_scores_to_frames({0.2, 0.8}, 2) == std::vector<double>{0.2, 0.2, 0.8, 0.8});
    CHECK(expand_scores_to_frames({0.5}, 1) == std::vector<double>{0.5});
    CHECK(expand_scores_to_frames({0.1, 0.2, 0.3}, 5).size() == 15);
    CHECK_THROWS_AS(expand_scores_to_frames({0.1}, 0), ContractError);
}

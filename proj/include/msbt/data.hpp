#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msbt/modality.hpp"
#include "msbt/tensor.hpp"

namespace msbt {

// One video's worth of precomputed per-snippet features. Feature tensors are
// double precision in memory (converted from the float32 files) and never
// require grad.
struct VideoSample {
    std::string id;
    std::vector<std::pair<Modality, Tensor>> features;  // canonical modality order
    std::optional<int> video_label;                     // 0/1 when known
    std::vector<uint8_t> frame_labels;                  // empty when absent

    size_t snippet_count() const;
    bool has_modality(Modality m) const;
    const Tensor& features_for(Modality m) const;
    int label_or_throw() const;
};

struct ManifestEntry {
    std::string id;
    std::map<Modality, std::string> paths;  // absent modalities omitted
    std::string label_field;                // "0", "1", "-" or a label-file path
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::map<Modality, size_t> dims;  // validated per modality across videos
    size_t frames_per_snippet = 0;    // inferred from label files; 0 if unknown
};

struct Dataset {
    Manifest manifest;
    std::vector<VideoSample> samples;
};

// Binary snippet-feature file: 16-byte header (magic "MSBF", u32 version=1,
// u32 T, u32 D, little-endian) followed by T*D little-endian float32 values,
// row-major.
void write_feature_file(const std::string& path, size_t t, size_t d,
                        const std::vector<double>& row_major);
Tensor read_feature_file(const std::string& path);  // [T x D]

// Frame labels: one '0'/'1' character per frame, newline-terminated.
void write_label_file(const std::string& path, const std::vector<uint8_t>& labels);
std::vector<uint8_t> read_label_file(const std::string& path);

// Writes a sample's feature files (<id>_r.msbf etc.) and, when frame labels
// exist, <id>_labels.txt, into dir. Returns the manifest line fields.
ManifestEntry write_sample(const VideoSample& sample, const std::string& dir);

// Tab-separated manifest: id, rgb path, flow path, audio path, label field.
// "#" starts a comment, "-" marks an absent modality or label. Paths are
// resolved relative to the manifest's directory.
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
Dataset load_manifest(const std::string& path);

// Synthetic multimodal videos: Gaussian background, short benign
// single-modality activity bursts in every video, and — in anomalous videos
// only — one event where all modalities bump over the same window (audio may
// lag by the asynchrony offset). Burst placement avoids accidental
// all-modality coincidences, so cross-modal alignment is unique to labeled
// events while whole-video statistics overlap heavily across classes. Frame
// labels follow the visual event window. Fully determined by the seed;
// feature values are float32-quantized so in-memory and on-disk data are
// bit-identical.
struct SynthConfig {
    size_t num_videos = 8;
    size_t t_min = 16;
    size_t t_max = 16;
    std::map<Modality, size_t> dims = {
        {Modality::Rgb, 32}, {Modality::Flow, 32}, {Modality::Audio, 16}};
    double anomaly_rate = 0.5;
    size_t event_min = 4;  // snippets
    size_t event_max = 8;
    double signal = 2.5;
    size_t async_offset = 0;  // audio lag in snippets
    size_t frames_per_snippet = 16;
    // Per-video, per-dim mean centering (as a feature pipeline would apply).
    // Removes video-level mean statistics, so detection has to key on the
    // per-snippet signal rather than a whole-video average.
    bool center = true;
    // Benign unaligned activity bursts in all videos.
    bool distractors = true;
    uint64_t seed = 1;

    void validate() const;
};

std::vector<VideoSample> generate_synthetic(const SynthConfig& cfg);

// Generates, writes feature/label files plus "manifest.tsv" under dir, and
// returns the manifest path.
std::string synth_to_dir(const SynthConfig& cfg, const std::string& dir);

// Each snippet score repeated frames_per_snippet times.
std::vector<double> expand_scores_to_frames(const std::vector<double>& scores,
                                            size_t frames_per_snippet);

}  // namespace msbt

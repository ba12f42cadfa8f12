#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msbt/model.hpp"

namespace msbt {

// Non-interpolated average precision over a ranked list: scores sorted
// descending, ties broken by original position (stable and documented —
// constant-score models make ties common). Sum of precision at each positive
// rank divided by the positive count. Throws DomainError when no positive
// labels exist (the metric is undefined).
double average_precision(const std::vector<double>& scores,
                         const std::vector<uint8_t>& labels);

struct EvalReport {
    double frame_ap = 0.0;
    size_t num_frames = 0;
    size_t num_positive_frames = 0;
    std::vector<std::string> per_video_csv;  // paths, when an out dir was given
};

// Scores every sample, expands snippet scores to frames (frames-per-snippet
// inferred from each video's label count), concatenates all videos in order
// and computes one global AP. Every sample must carry frame labels. When
// out_dir is nonempty, writes per-video "frame_index,score,label" CSVs.
EvalReport evaluate_samples(const Model& model, const std::vector<VideoSample>& samples,
                            const std::string& out_dir = "");

}  // namespace msbt

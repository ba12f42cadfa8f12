#include "msbt/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "msbt/data.hpp"
#include "msbt/error.hpp"

namespace fs = std::filesystem;

namespace msbt {

double average_precision(const std::vector<double>& scores,
                         const std::vector<uint8_t>& labels) {
    if (scores.size() != labels.size()) {
        throw DimensionError("average_precision: " + std::to_string(scores.size()) +
                             " scores vs " + std::to_string(labels.size()) + " labels");
    }
    const size_t n = scores.size();
    size_t npos = 0;
    for (uint8_t l : labels) npos += (l != 0);
    if (npos == 0) {
        throw DomainError("average_precision: no positive labels; the metric is undefined");
    }

    std::vector<size_t> rank(n);
    std::iota(rank.begin(), rank.end(), size_t{0});
    std::sort(rank.begin(), rank.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    double sum = 0.0;
    size_t tp = 0;
    for (size_t r = 0; r < n; ++r) {
        if (labels[rank[r]] != 0) {
            ++tp;
            sum += static_cast<double>(tp) / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(npos);
}

EvalReport evaluate_samples(const Model& model, const std::vector<VideoSample>& samples,
                            const std::string& out_dir) {
    if (!out_dir.empty()) fs::create_directories(out_dir);

    EvalReport report;
    std::vector<double> all_scores;
    std::vector<uint8_t> all_labels;
    for (const auto& sample : samples) {
        if (sample.frame_labels.empty()) {
            throw ContractError("video '" + sample.id + "': evaluation needs frame labels");
        }
        const size_t t = sample.snippet_count();
        const size_t fps = sample.frame_labels.size() / t;

        ForwardResult fwd = model.forward(sample);
        const std::vector<double> frame_scores =
            expand_scores_to_frames(fwd.scores.values(), fps);
        all_scores.insert(all_scores.end(), frame_scores.begin(), frame_scores.end());
        all_labels.insert(all_labels.end(), sample.frame_labels.begin(),
                          sample.frame_labels.end());

        if (!out_dir.empty()) {
            const std::string path = (fs::path(out_dir) / (sample.id + "_scores.csv")).string();
            std::ofstream out(path);
            if (!out) throw IoError("cannot write '" + path + "'");
            out << "frame_index,score,label\n";
            char buf[80];
            for (size_t i = 0; i < frame_scores.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%zu,%.9g,%d\n", i, frame_scores[i],
                              static_cast<int>(sample.frame_labels[i]));
                out << buf;
            }
            report.per_video_csv.push_back(path);
        }
    }

    report.num_frames = all_labels.size();
    for (uint8_t l : all_labels) report.num_positive_frames += (l != 0);
    report.frame_ap = average_precision(all_scores, all_labels);
    return report;
}

}  // namespace msbt

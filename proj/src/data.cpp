#include "msbt/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "msbt/error.hpp"
#include "msbt/rng.hpp"

namespace fs = std::filesystem;

namespace msbt {
namespace {

constexpr char kMagic[4] = {'M', 'S', 'B', 'F'};
constexpr uint32_t kVersion = 1;

void put_u32_le(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

std::string read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_all(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + path + "'");
}

// float32 round-trip without relying on host float layout beyond IEEE-754.
uint32_t f32_bits(float f) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    return u;
}

float bits_f32(uint32_t u) {
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

}  // namespace

size_t VideoSample::snippet_count() const {
    if (features.empty()) throw ContractError("video '" + id + "': no features");
    return features.front().second.rows();
}

bool VideoSample::has_modality(Modality m) const {
    for (const auto& [mm, f] : features) {
        if (mm == m) return true;
    }
    return false;
}

const Tensor& VideoSample::features_for(Modality m) const {
    for (const auto& [mm, f] : features) {
        if (mm == m) return f;
    }
    throw ContractError(std::string("video '") + id + "': missing modality '" +
                        modality_letter(m) + "'");
}

int VideoSample::label_or_throw() const {
    if (!video_label) throw ContractError("video '" + id + "': no label");
    return *video_label;
}

void write_feature_file(const std::string& path, size_t t, size_t d,
                        const std::vector<double>& row_major) {
    if (row_major.size() != t * d) {
        throw DimensionError("write_feature_file: " + std::to_string(row_major.size()) +
                             " values for " + std::to_string(t) + "x" + std::to_string(d));
    }
    std::string bytes;
    bytes.reserve(16 + 4 * row_major.size());
    bytes.append(kMagic, 4);
    put_u32_le(bytes, kVersion);
    put_u32_le(bytes, static_cast<uint32_t>(t));
    put_u32_le(bytes, static_cast<uint32_t>(d));
    for (double v : row_major) put_u32_le(bytes, f32_bits(static_cast<float>(v)));
    write_all(path, bytes);
}

Tensor read_feature_file(const std::string& path) {
    const std::string bytes = read_all(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw IoError("'" + path + "' is not a feature file (bad magic)");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const uint32_t version = get_u32_le(p + 4);
    if (version != kVersion) {
        throw IoError("'" + path + "': unsupported feature-file version " +
                      std::to_string(version));
    }
    const size_t t = get_u32_le(p + 8);
    const size_t d = get_u32_le(p + 12);
    if (t == 0 || d == 0 || bytes.size() != 16 + 4 * t * d) {
        throw IoError("'" + path + "': truncated or inconsistent feature file");
    }
    std::vector<double> data(t * d);
    for (size_t i = 0; i < t * d; ++i) {
        data[i] = static_cast<double>(bits_f32(get_u32_le(p + 16 + 4 * i)));
    }
    return Tensor({t, d}, std::move(data), false);
}

void write_label_file(const std::string& path, const std::vector<uint8_t>& labels) {
    std::string bytes;
    bytes.reserve(labels.size() + 1);
    for (uint8_t l : labels) bytes.push_back(l ? '1' : '0');
    bytes.push_back('\n');
    write_all(path, bytes);
}

std::vector<uint8_t> read_label_file(const std::string& path) {
    const std::string bytes = read_all(path);
    std::vector<uint8_t> out;
    out.reserve(bytes.size());
    for (char c : bytes) {
        if (c == '\n' || c == '\r') continue;
        if (c == '0') {
            out.push_back(0);
        } else if (c == '1') {
            out.push_back(1);
        } else {
            throw IoError("'" + path + "': frame labels must be 0/1 characters");
        }
    }
    return out;
}

ManifestEntry write_sample(const VideoSample& sample, const std::string& dir) {
    fs::create_directories(dir);
    ManifestEntry entry;
    entry.id = sample.id;
    for (const auto& [m, f] : sample.features) {
        const std::string name =
            sample.id + "_" + static_cast<char>(std::tolower(modality_letter(m))) + ".msbf";
        write_feature_file((fs::path(dir) / name).string(), f.rows(), f.cols(), f.values());
        entry.paths[m] = name;
    }
    if (!sample.frame_labels.empty()) {
        const std::string name = sample.id + "_labels.txt";
        write_label_file((fs::path(dir) / name).string(), sample.frame_labels);
        entry.label_field = name;
    } else if (sample.video_label) {
        entry.label_field = std::to_string(*sample.video_label);
    } else {
        entry.label_field = "-";
    }
    return entry;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::string out = "# id\trgb\tflow\taudio\tlabel\n";
    for (const auto& e : entries) {
        out += e.id;
        for (Modality m : {Modality::Rgb, Modality::Flow, Modality::Audio}) {
            auto it = e.paths.find(m);
            out += "\t" + (it == e.paths.end() ? std::string("-") : it->second);
        }
        out += "\t" + e.label_field + "\n";
    }
    write_all(path, out);
}

Dataset load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path + "'");
    const fs::path base = fs::path(path).parent_path();

    Dataset ds;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);
        if (fields.size() != 5) {
            throw IoError("manifest '" + path + "' line " + std::to_string(lineno) +
                          ": expected 5 tab-separated fields, got " +
                          std::to_string(fields.size()));
        }

        ManifestEntry entry;
        entry.id = fields[0];
        const Modality order[3] = {Modality::Rgb, Modality::Flow, Modality::Audio};
        for (int i = 0; i < 3; ++i) {
            if (fields[i + 1] != "-") entry.paths[order[i]] = fields[i + 1];
        }
        entry.label_field = fields[4];
        if (entry.paths.empty()) {
            throw IoError("video '" + entry.id + "': no modality paths in manifest");
        }
        for (const auto& prev : ds.manifest.entries) {
            if (prev.id == entry.id) {
                throw IoError("duplicate video id '" + entry.id + "' in manifest");
            }
        }

        VideoSample sample;
        sample.id = entry.id;
        size_t t = 0;
        Modality t_source = Modality::Rgb;
        for (const auto& [m, rel] : entry.paths) {
            const std::string fpath = (base / rel).string();
            Tensor f;
            try {
                f = read_feature_file(fpath);
            } catch (const IoError& e) {
                throw IoError("video '" + entry.id + "': " + e.what());
            }
            if (t == 0) {
                t = f.rows();
                t_source = m;
            } else if (f.rows() != t) {
                throw IoError("video '" + entry.id + "': modality '" +
                              modality_letter(m) + "' has T=" + std::to_string(f.rows()) +
                              " but '" + modality_letter(t_source) +
                              "' has T=" + std::to_string(t));
            }
            auto dim_it = ds.manifest.dims.find(m);
            if (dim_it == ds.manifest.dims.end()) {
                ds.manifest.dims[m] = f.cols();
            } else if (dim_it->second != f.cols()) {
                throw IoError("video '" + entry.id + "': modality '" + modality_letter(m) +
                              "' dim " + std::to_string(f.cols()) +
                              " differs from earlier videos' " +
                              std::to_string(dim_it->second));
            }
            sample.features.emplace_back(m, std::move(f));
        }

        if (entry.label_field == "0" || entry.label_field == "1") {
            sample.video_label = entry.label_field == "1" ? 1 : 0;
        } else if (entry.label_field != "-") {
            std::vector<uint8_t> labels;
            try {
                labels = read_label_file((base / entry.label_field).string());
            } catch (const IoError& e) {
                throw IoError("video '" + entry.id + "': " + e.what());
            }
            if (labels.empty() || labels.size() % t != 0) {
                throw IoError("video '" + entry.id + "': " + std::to_string(labels.size()) +
                              " frame labels is not a positive multiple of T=" +
                              std::to_string(t));
            }
            const size_t fps = labels.size() / t;
            if (ds.manifest.frames_per_snippet == 0) {
                ds.manifest.frames_per_snippet = fps;
            } else if (ds.manifest.frames_per_snippet != fps) {
                throw IoError("video '" + entry.id + "': frames per snippet " +
                              std::to_string(fps) + " differs from earlier videos' " +
                              std::to_string(ds.manifest.frames_per_snippet));
            }
            sample.frame_labels = std::move(labels);
            sample.video_label =
                std::any_of(sample.frame_labels.begin(), sample.frame_labels.end(),
                            [](uint8_t l) { return l != 0; })
                    ? 1
                    : 0;
        }

        ds.manifest.entries.push_back(std::move(entry));
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

void SynthConfig::validate() const {
    if (num_videos == 0) throw ConfigError("synth: num_videos must be >= 1");
    if (t_min == 0 || t_min > t_max) throw ConfigError("synth: bad T range");
    if (dims.size() < 2) throw ConfigError("synth: need at least 2 modalities");
    for (const auto& [m, d] : dims) {
        if (d == 0) throw ConfigError("synth: zero feature dim");
    }
    if (anomaly_rate < 0.0 || anomaly_rate > 1.0) throw ConfigError("synth: anomaly_rate in [0,1]");
    if (event_min == 0 || event_min > event_max) throw ConfigError("synth: bad event length range");
    if (async_offset >= event_min) {
        throw ConfigError("synth: asynchrony offset must be smaller than the event length");
    }
    if (event_max + async_offset > t_min) {
        throw ConfigError("synth: events (plus asynchrony) must fit in the shortest video");
    }
    if (frames_per_snippet == 0) throw ConfigError("synth: frames_per_snippet must be >= 1");
}

std::vector<VideoSample> generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const size_t n_anom = static_cast<size_t>(
        std::llround(cfg.anomaly_rate * static_cast<double>(cfg.num_videos)));

    std::vector<VideoSample> out;
    out.reserve(cfg.num_videos);
    for (size_t vi = 0; vi < cfg.num_videos; ++vi) {
        const bool anomalous = vi < n_anom;
        const size_t t = static_cast<size_t>(
            rng.uniform_int(static_cast<int64_t>(cfg.t_min), static_cast<int64_t>(cfg.t_max)));

        VideoSample sample;
        {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "video_%04zu", vi);
            sample.id = buf;
        }
        std::map<Modality, std::vector<double>> feats;
        for (const auto& [m, d] : cfg.dims) {
            auto& v = feats[m];
            v.resize(t * d);
            for (auto& x : v) x = rng.gaussian();
        }

        std::vector<uint8_t> snippet_labels(t, 0);
        auto add_bump = [&](Modality m, size_t start, size_t len) {
            const size_t d = cfg.dims.at(m);
            const size_t sig_dims = std::min<size_t>(8, d);
            auto& v = feats[m];
            for (size_t s = start; s < start + len; ++s) {
                for (size_t j = 0; j < sig_dims; ++j) v[s * d + j] += cfg.signal;
            }
        };

        size_t event_start = 0, event_len = 0;
        if (anomalous) {
            // One event: every modality bumps over the same window, audio
            // lagging by the configured offset. Labels follow the visual window.
            event_len = static_cast<size_t>(rng.uniform_int(
                static_cast<int64_t>(cfg.event_min), static_cast<int64_t>(cfg.event_max)));
            event_start = static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(t - event_len - cfg.async_offset)));
            for (const auto& [m, d] : cfg.dims) {
                add_bump(m, m == Modality::Audio ? event_start + cfg.async_offset : event_start,
                         event_len);
            }
            for (size_t s = event_start; s < event_start + event_len; ++s) snippet_labels[s] = 1;
        }

        if (cfg.distractors) {
            // Benign activity bursts in every video: short single-modality
            // bumps whose counts and placement make whole-video statistics
            // overlap across classes. Bursts are re-drawn when they would
            // create an accidental all-modality coincidence on an unlabeled
            // snippet (and dropped if that keeps failing), so cross-modal
            // alignment stays unique to the labeled events.
            std::vector<uint8_t> covered[3];
            for (int m = 0; m < 3; ++m) covered[m].assign(t, 0);
            if (anomalous) {
                int emi = 0;
                for (const auto& [m, d] : cfg.dims) {
                    const size_t lag = (m == Modality::Audio) ? cfg.async_offset : 0;
                    for (size_t s = event_start + lag; s < event_start + event_len + lag; ++s) {
                        covered[emi][s] = 1;
                    }
                    ++emi;
                }
            }
            auto would_align = [&](int mi, size_t start, size_t len) {
                for (size_t s = start; s < start + len; ++s) {
                    bool all = true;
                    for (size_t mj = 0; mj < cfg.dims.size(); ++mj) {
                        if (static_cast<int>(mj) != mi && !covered[mj][s]) {
                            all = false;
                            break;
                        }
                    }
                    if (all && !snippet_labels[s]) return true;
                }
                return false;
            };
            int mi = 0;
            for (const auto& [m, d] : cfg.dims) {
                const size_t bursts =
                    static_cast<size_t>(rng.uniform_int(2, 4));
                for (size_t b = 0; b < bursts; ++b) {
                    const size_t len = static_cast<size_t>(rng.uniform_int(2, 4));
                    bool placed = false;
                    for (int attempt = 0; attempt < 16 && !placed; ++attempt) {
                        const size_t start = static_cast<size_t>(
                            rng.uniform_int(0, static_cast<int64_t>(t - len)));
                        if (would_align(mi, start, len)) continue;
                        add_bump(m, start, len);
                        for (size_t s = start; s < start + len; ++s) covered[mi][s] = 1;
                        placed = true;
                    }
                }
                ++mi;
            }
        }

        for (const auto& [m, d] : cfg.dims) {
            auto& v = feats[m];
            if (cfg.center) {
                for (size_t j = 0; j < d; ++j) {
                    double mu = 0.0;
                    for (size_t s = 0; s < t; ++s) mu += v[s * d + j];
                    mu /= static_cast<double>(t);
                    for (size_t s = 0; s < t; ++s) v[s * d + j] -= mu;
                }
            }
            // Quantize through float32 so memory and disk agree bit-for-bit.
            for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
            sample.features.emplace_back(m, Tensor({t, d}, std::move(v), false));
        }
        sample.video_label = anomalous ? 1 : 0;
        sample.frame_labels.resize(t * cfg.frames_per_snippet);
        for (size_t s = 0; s < t; ++s) {
            std::fill_n(sample.frame_labels.begin() +
                            static_cast<std::ptrdiff_t>(s * cfg.frames_per_snippet),
                        cfg.frames_per_snippet, snippet_labels[s]);
        }
        out.push_back(std::move(sample));
    }
    return out;
}

std::string synth_to_dir(const SynthConfig& cfg, const std::string& dir) {
    const auto samples = generate_synthetic(cfg);
    fs::create_directories(dir);
    std::vector<ManifestEntry> entries;
    entries.reserve(samples.size());
    for (const auto& s : samples) entries.push_back(write_sample(s, dir));
    const std::string manifest_path = (fs::path(dir) / "manifest.tsv").string();
    write_manifest(manifest_path, entries);
    return manifest_path;
}

std::vector<double> expand_scores_to_frames(const std::vector<double>& scores,
                                            size_t frames_per_snippet) {
    if (frames_per_snippet == 0) {
        throw ContractError("expand_scores_to_frames: frames_per_snippet must be >= 1");
    }
    std::vector<double> out;
    out.reserve(scores.size() * frames_per_snippet);
    for (double s : scores) {
        out.insert(out.end(), frames_per_snippet, s);
    }
    return out;
}

}  // namespace msbt

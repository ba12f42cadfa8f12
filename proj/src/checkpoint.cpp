#include "msbt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "msbt/error.hpp"

namespace msbt {
namespace {

constexpr char kMagic[4] = {'M', 'S', 'B', 'C'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

struct Reader {
    const unsigned char* p;
    size_t left;
    const std::string& path;

    void need(size_t n) const {
        if (left < n) throw IoError("checkpoint '" + path + "' is truncated or corrupt");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
        p += 4;
        left -= 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        p += 8;
        left -= 8;
        return v;
    }
    double f64() {
        const uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    std::string str(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        left -= n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, size_t epoch,
                     uint64_t seed) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, seed);
    put_u32(out, static_cast<uint32_t>(epoch));

    RunConfig rc;
    rc.model = model.config();
    const std::string cfg_text = config_to_text(rc);
    put_u64(out, cfg_text.size());
    out += cfg_text;

    const auto& params = model.parameters();
    put_u64(out, params.size());
    for (const auto& [name, t] : params) {
        put_u32(out, static_cast<uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<uint32_t>(t.shape().size()));
        for (size_t d : t.shape()) put_u64(out, d);
        for (double v : t.values()) put_f64(out, v);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint '" + path + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to checkpoint '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string bytes = ss.str();

    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw IoError("'" + path + "' is not a checkpoint (bad magic)");
    }
    Reader r{reinterpret_cast<const unsigned char*>(bytes.data()) + 4, bytes.size() - 4, path};
    const uint32_t version = r.u32();
    if (version != kVersion) {
        throw IoError("checkpoint '" + path + "': unsupported version " +
                      std::to_string(version));
    }
    const uint64_t seed = r.u64();
    const size_t epoch = r.u32();
    const uint64_t cfg_len = r.u64();
    const std::string cfg_text = r.str(cfg_len);
    RunConfig rc = parse_config_text(cfg_text);

    Model model(rc.model, /*seed=*/0);
    const size_t n_params = r.u64();
    if (n_params != model.parameters().size()) {
        throw IoError("checkpoint '" + path + "': has " + std::to_string(n_params) +
                      " parameters but the config builds " +
                      std::to_string(model.parameters().size()));
    }
    auto params = model.parameters();  // shared storage; map copy is cheap
    for (size_t i = 0; i < n_params; ++i) {
        const uint32_t key_len = r.u32();
        const std::string key = r.str(key_len);
        auto it = params.find(key);
        if (it == params.end()) {
            throw IoError("checkpoint '" + path + "': unknown parameter '" + key + "'");
        }
        const uint32_t rank = r.u32();
        Shape shape(rank);
        for (auto& d : shape) d = r.u64();
        Tensor t = it->second;
        if (shape != t.shape()) {
            throw IoError("checkpoint '" + path + "': parameter '" + key + "' has shape " +
                          shape_str(shape) + " but the model expects " + shape_str(t.shape()));
        }
        auto& dst = t.leaf_values();
        for (auto& v : dst) v = r.f64();
    }
    if (r.left != 0) {
        throw IoError("checkpoint '" + path + "': trailing bytes (corrupt file)");
    }
    return LoadedCheckpoint{std::move(model), epoch, seed};
}

}  // namespace msbt

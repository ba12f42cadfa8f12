#pragma once

#include <string>
#include <vector>

#include "msbt/error.hpp"

namespace msbt {

// Input streams: RGB appearance, optical flow, audio. Canonical order R, F, A
// drives parameter naming, pair ordering and manifest columns.
enum class Modality { Rgb = 0, Flow = 1, Audio = 2 };

inline char modality_letter(Modality m) {
    switch (m) {
        case Modality::Rgb: return 'R';
        case Modality::Flow: return 'F';
        case Modality::Audio: return 'A';
    }
    return '?';
}

inline Modality parse_modality(char c) {
    switch (c) {
        case 'r': case 'R': return Modality::Rgb;
        case 'f': case 'F': return Modality::Flow;
        case 'a': case 'A': return Modality::Audio;
        default: throw ConfigError(std::string("unknown modality '") + c + "'");
    }
}

// "r,f,a" / "rf" style lists; deduplicates and returns canonical order.
std::vector<Modality> parse_modalities(const std::string& s);
std::string modalities_str(const std::vector<Modality>& mods);

// One directed fusion: condense information of `src` into `dst`.
struct ModalityPair {
    Modality src;
    Modality dst;
    std::string name() const {
        return std::string(1, modality_letter(src)) + modality_letter(dst);
    }
    bool operator==(const ModalityPair&) const = default;
};

// All ordered pairs of the configured modalities in the fixed concatenation
// order RF, FR, RA, AR, FA, AF (restricted to what is configured).
std::vector<ModalityPair> ordered_pairs(const std::vector<Modality>& mods);

}  // namespace msbt

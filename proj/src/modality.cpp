#include "msbt/modality.hpp"

#include <cctype>

namespace msbt {

std::vector<Modality> parse_modalities(const std::string& s) {
    bool present[3] = {false, false, false};
    for (char c : s) {
        if (c == ',' || c == ' ') continue;
        present[static_cast<int>(parse_modality(c))] = true;
    }
    std::vector<Modality> out;
    for (Modality m : {Modality::Rgb, Modality::Flow, Modality::Audio}) {
        if (present[static_cast<int>(m)]) out.push_back(m);
    }
    if (out.empty()) throw ConfigError("no modalities in '" + s + "'");
    return out;
}

std::string modalities_str(const std::vector<Modality>& mods) {
    std::string s;
    for (size_t i = 0; i < mods.size(); ++i) {
        if (i) s += ",";
        s += static_cast<char>(std::tolower(modality_letter(mods[i])));
    }
    return s;
}

std::vector<ModalityPair> ordered_pairs(const std::vector<Modality>& mods) {
    static const ModalityPair kOrder[6] = {
        {Modality::Rgb, Modality::Flow},   {Modality::Flow, Modality::Rgb},
        {Modality::Rgb, Modality::Audio},  {Modality::Audio, Modality::Rgb},
        {Modality::Flow, Modality::Audio}, {Modality::Audio, Modality::Flow},
    };
    auto configured = [&](Modality m) {
        for (Modality x : mods) {
            if (x == m) return true;
        }
        return false;
    };
    std::vector<ModalityPair> out;
    for (const auto& p : kOrder) {
        if (configured(p.src) && configured(p.dst)) out.push_back(p);
    }
    return out;
}

}  // namespace msbt

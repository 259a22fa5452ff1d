#include "rlfi/types.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>

namespace rlfi {

namespace {

const std::array<std::string, kNumDimensions> kLabels = {"D1", "D2", "D3", "D4",
                                                         "D5", "D6", "D7", "D8"};

// Distinctive lowercase substrings for descriptive dimension names.
const std::array<std::vector<std::string>, kNumDimensions> kNameHints = {{
    {"verification"},
    {"simulability", "environment"},
    {"observability", "state"},
    {"variability", "knowledge breadth"},
    {"decision depth", "sequential"},
    {"feedback"},
    {"tool", "interface"},
    {"tangibility", "output"},
}};

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

const std::string& dimension_label(int idx) { return kLabels.at(static_cast<std::size_t>(idx)); }

int canonical_dimension(const std::string& key) {
    const std::string k = lower(key);
    // "d4", "D4: ..." as a standalone token
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
        if (k[i] == 'd' && k[i + 1] >= '1' && k[i + 1] <= '8') {
            bool left_ok = (i == 0) || !std::isalnum(static_cast<unsigned char>(k[i - 1]));
            bool right_ok = (i + 2 >= k.size()) || !std::isalnum(static_cast<unsigned char>(k[i + 2]));
            if (left_ok && right_ok) return k[i + 1] - '1';
        }
    }
    for (int d = 0; d < kNumDimensions; ++d) {
        for (const auto& hint : kNameHints[static_cast<std::size_t>(d)]) {
            if (k.find(hint) != std::string::npos) return d;
        }
    }
    return -1;
}

std::string YearMonth::str() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
    return buf;
}

YearMonth YearMonth::from_index(int idx) {
    YearMonth p;
    p.year = idx / 12;
    p.month = idx % 12 + 1;
    return p;
}

YearMonth YearMonth::parse(const std::string& s) {
    int y = 0, m = 0, d = 0;
    const int n = std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d);
    if (n < 2 || y < 1000 || y > 9999 || m < 1 || m > 12)
        throw std::invalid_argument("unparseable period: '" + s + "' (expected YYYY-MM)");
    return YearMonth{y, m};
}

std::string soc_major_group(const std::string& soc_code) {
    return soc_code.substr(0, std::min<std::size_t>(2, soc_code.size()));
}

}  // namespace rlfi

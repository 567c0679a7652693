#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "lvpc/data.hpp"
#include "lvpc/error.hpp"

namespace lvpc {

/// Which variables one family of specifications may draw on.
struct FamilyRule {
    std::string name;
    std::vector<std::string> activity;  // exactly one per spec
    std::vector<std::string> controls;  // any subset per spec
};

struct FactorSpec {
    std::string spec_id;
    std::string family;
    std::string dependent;
    std::string activity;
    std::vector<std::string> controls;  // sorted

    std::vector<std::string> regressors() const {
        std::vector<std::string> out{activity};
        out.insert(out.end(), controls.begin(), controls.end());
        return out;
    }
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Stable id from the variable content; control order does not matter and the family is not part of it.
inline std::string spec_hash(const std::string& dependent, const std::string& activity, std::vector<std::string> controls) {
    std::sort(controls.begin(), controls.end());
    std::string key = dependent + '\x1f' + activity;
    for (const auto& c : controls) key += '\x1e' + c;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(key)));
    return buf;
}

inline constexpr std::size_t kMaxControls = 24;

/// Every (activity variant) x (subset of controls) for each family.
///
/// Specs with identical content across families are kept once, under the first
/// family that produced them. The result is ordered by spec_id.
inline std::vector<FactorSpec> generate_specs(const std::string& dependent, const std::vector<FamilyRule>& families) {
    std::map<std::string, FactorSpec> out;
    for (const auto& fam : families) {
        if (fam.activity.empty()) throw ConfigError("family '" + fam.name + "' has no activity variables");
        std::set<std::string> uniq(fam.controls.begin(), fam.controls.end());
        if (uniq.size() != fam.controls.size()) throw ConfigError("family '" + fam.name + "' lists a control twice");
        if (fam.controls.size() > kMaxControls) throw ConfigError("family '" + fam.name + "' has too many controls");
        const std::size_t k = fam.controls.size();
        for (const auto& act : fam.activity) {
            if (uniq.count(act)) throw ConfigError("'" + act + "' is both activity and control in '" + fam.name + "'");
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
                FactorSpec s;
                s.family = fam.name;
                s.dependent = dependent;
                s.activity = act;
                for (std::size_t i = 0; i < k; ++i) {
                    if (mask >> i & 1U) s.controls.push_back(fam.controls[i]);
                }
                std::sort(s.controls.begin(), s.controls.end());
                s.spec_id = spec_hash(dependent, act, s.controls);
                if (auto it = out.find(s.spec_id); it != out.end()) {
                    if (it->second.activity != s.activity || it->second.controls != s.controls) {
                        throw IntegrityError("spec id collision for " + s.spec_id);
                    }
                    continue;
                }
                out.emplace(s.spec_id, std::move(s));
            }
        }
    }
    std::vector<FactorSpec> v;
    v.reserve(out.size());
    for (auto& [id, s] : out) v.push_back(std::move(s));
    return v;
}

/// Number of specs per family before cross-family de-duplication.
inline std::size_t raw_spec_count(const FamilyRule& fam) {
    return fam.activity.size() * (std::size_t{1} << fam.controls.size());
}

inline std::map<std::string, std::size_t> count_by_family(const std::vector<FactorSpec>& specs) {
    std::map<std::string, std::size_t> out;
    for (const auto& s : specs) ++out[s.family];
    return out;
}

inline void write_specs_csv(std::ostream& out, const std::vector<FactorSpec>& specs) {
    out << "spec_id,family,activity,controls\n";
    for (const auto& s : specs) {
        std::string controls;
        for (std::size_t i = 0; i < s.controls.size(); ++i) controls += (i ? ";" : "") + s.controls[i];
        out << s.spec_id << ',' << detail::csv_field(s.family) << ',' << detail::csv_field(s.activity) << ','
            << detail::csv_field(controls) << '\n';
    }
}

}  // namespace lvpc

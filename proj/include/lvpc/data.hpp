#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lvpc/calendar.hpp"
#include "lvpc/error.hpp"

namespace lvpc {

/// One published number: the value for `period` as released on `release`.
struct Observation {
    Date period;
    Date release;
    double value = 0.0;
};

/// Plain (single-vintage) series keyed by period end date.
using DatedSeries = std::map<Date, double>;

/// Quarterly series that may contain gaps.
using QuarterMap = std::map<Quarter, double>;

/// Gap-free quarterly series starting at `first`.
struct QuarterlySeries {
    Quarter first{};
    std::vector<double> values;

    bool empty() const { return values.empty(); }
    std::size_t size() const { return values.size(); }
    Quarter last() const { return first + static_cast<int>(values.size()) - 1; }
    bool contains(Quarter q) const { return !empty() && q >= first && q <= last(); }
    double at(Quarter q) const { return values.at(static_cast<std::size_t>(q - first)); }

    /// Drops every quarter after `q`.
    QuarterlySeries truncated(Quarter q) const {
        QuarterlySeries out{first, {}};
        if (empty() || q < first) return out;
        const auto keep = std::min<std::size_t>(values.size(), static_cast<std::size_t>(q - first + 1));
        out.values.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(keep));
        return out;
    }

    static QuarterlySeries from(Quarter first, std::vector<double> v) { return {first, std::move(v)}; }
};

/// A point-in-time series: every observation carries its release date.
///
/// Observations are kept sorted by (period, release). For a fixed period several
/// releases (revisions) may exist; `as_of(d)` picks the latest one dated <= d.
class VintageSeries {
public:
    VintageSeries() = default;

    VintageSeries(std::string id, std::vector<Observation> obs) : id_(std::move(id)), obs_(std::move(obs)) {
        std::sort(obs_.begin(), obs_.end(), [](const Observation& a, const Observation& b) {
            return a.period != b.period ? a.period < b.period : a.release < b.release;
        });
        for (std::size_t i = 0; i < obs_.size(); ++i) {
            if (!std::isfinite(obs_[i].value)) {
                throw IntegrityError("series '" + id_ + "': non-finite value for period " +
                                     format_date(obs_[i].period));
            }
            if (i > 0 && obs_[i].period == obs_[i - 1].period && obs_[i].release == obs_[i - 1].release) {
                throw IntegrityError("series '" + id_ + "': duplicate (period, release) " +
                                     format_date(obs_[i].period) + ", " + format_date(obs_[i].release));
            }
        }
        build_release_index();
    }

    /// Series without version control: one release per period, `lag_days` after the period end.
    static VintageSeries unversioned(std::string id, const DatedSeries& values, int lag_days = 1) {
        std::vector<Observation> obs;
        obs.reserve(values.size());
        for (const auto& [p, v] : values) obs.push_back({p, p + std::chrono::days{lag_days}, v});
        return VintageSeries(std::move(id), std::move(obs));
    }

    const std::string& id() const { return id_; }
    std::span<const Observation> observations() const { return obs_; }
    bool empty() const { return obs_.empty(); }
    std::size_t size() const { return obs_.size(); }

    DatedSeries as_of(Date d) const {
        DatedSeries out;
        for (std::size_t i = 0; i < obs_.size();) {
            std::size_t j = i;
            const Observation* best = nullptr;
            while (j < obs_.size() && obs_[j].period == obs_[i].period) {
                if (obs_[j].release <= d) best = &obs_[j];
                ++j;
            }
            if (best) out.emplace_hint(out.end(), best->period, best->value);
            i = j;
        }
        return out;
    }

    /// Distinct release dates, ascending.
    const std::vector<Date>& release_dates() const { return releases_; }

    /// Number of distinct release dates <= d.
    std::size_t releases_through(Date d) const {
        return static_cast<std::size_t>(std::upper_bound(releases_.begin(), releases_.end(), d) - releases_.begin());
    }

    std::optional<Date> first_release() const {
        if (releases_.empty()) return std::nullopt;
        return releases_.front();
    }
    std::optional<Date> last_release() const {
        if (releases_.empty()) return std::nullopt;
        return releases_.back();
    }
    std::optional<Date> first_period() const {
        if (obs_.empty()) return std::nullopt;
        return obs_.front().period;
    }
    std::optional<Date> last_period() const {
        if (obs_.empty()) return std::nullopt;
        return obs_.back().period;
    }

    std::size_t period_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < obs_.size(); ++i) {
            if (i == 0 || obs_[i].period != obs_[i - 1].period) ++n;
        }
        return n;
    }
    std::size_t revision_count() const { return obs_.size() - period_count(); }

private:
    void build_release_index() {
        releases_.clear();
        releases_.reserve(obs_.size());
        for (const auto& o : obs_) releases_.push_back(o.release);
        std::sort(releases_.begin(), releases_.end());
        releases_.erase(std::unique(releases_.begin(), releases_.end()), releases_.end());
    }

    std::string id_;
    std::vector<Observation> obs_;
    std::vector<Date> releases_;
};

/// Read-only collection of vintage series keyed by series id.
class VintageStore {
public:
    void add(VintageSeries s) {
        const std::string key = s.id();
        if (series_.count(key)) throw IntegrityError("series '" + key + "' loaded twice");
        series_.emplace(key, std::move(s));
    }

    /// Merges another store; a series id may appear in only one of them.
    void merge(VintageStore other) {
        for (auto& [k, s] : other.series_) add(std::move(s));
    }

    bool contains(const std::string& id) const { return series_.count(id) > 0; }
    const VintageSeries& at(const std::string& id) const {
        auto it = series_.find(id);
        if (it == series_.end()) throw ConfigError("unknown series '" + id + "'");
        return it->second;
    }
    const std::map<std::string, VintageSeries>& all() const { return series_; }
    std::size_t size() const { return series_.size(); }
    bool empty() const { return series_.empty(); }

    /// Latest release date across all series.
    std::optional<Date> last_release() const {
        std::optional<Date> out;
        for (const auto& [k, s] : series_) {
            if (auto r = s.last_release(); r && (!out || *r > *out)) out = r;
        }
        return out;
    }

private:
    std::map<std::string, VintageSeries> series_;
};

// ---------------------------------------------------------------------------
// CSV ingestion

/// Header names for the four vintage columns.
struct ColumnMapping {
    std::string series_id = "series_id";
    std::string period = "period";
    std::string release = "release";
    std::string value = "value";
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
    }
    return out;
}

/// Quotes a field that contains a comma or a quote.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c != '"') out.push_back(c);
    }
    return out + '"';
}

inline double parse_finite(const std::string& s, std::size_t line, const std::string& source) {
    if (s.empty()) throw ParseError(source + ": empty value", line);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw ParseError(source + ": malformed number '" + s + "'", line);
    if (!std::isfinite(v)) throw ParseError(source + ": non-finite value '" + s + "'", line);
    return v;
}

}  // namespace detail

/// Loads a vintage CSV (`series_id,period,release,value` by default).
///
/// An empty release field marks a row of a series without version control; such a
/// series gets a synthetic release `lag_days` after the period end (per-series lags
/// in `release_lags`, default 1 day). Mixing empty and non-empty releases within one
/// series is an integrity error.
inline VintageStore load_vintage_csv(std::istream& in, const ColumnMapping& schema = {},
                                     const std::map<std::string, int>& release_lags = {},
                                     const std::string& source_name = "<stream>") {
    VintageStore store;
    std::string line;
    if (!std::getline(in, line)) return store;
    const auto header = detail::split_csv_line(line);
    auto col = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError(source_name + ": missing column '" + name + "'", 1);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_id = col(schema.series_id), c_period = col(schema.period), c_release = col(schema.release),
                      c_value = col(schema.value);
    const std::size_t width = std::max({c_id, c_period, c_release, c_value}) + 1;

    struct Pending {
        std::vector<Observation> obs;
        std::vector<std::size_t> lines;
        int versioned = -1;
    };
    std::map<std::string, Pending> pending;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() < width) throw ParseError(source_name + ": expected " + std::to_string(header.size()) + " fields", line_no);
        if (f[c_id].empty()) throw ParseError(source_name + ": empty series_id", line_no);
        Date period, release;
        try {
            period = parse_date(f[c_period]);
        } catch (const ParseError& e) {
            throw ParseError(source_name + ": " + std::string(e.what()), line_no);
        }
        auto& p = pending[f[c_id]];
        const bool has_release = !f[c_release].empty();
        if (p.versioned >= 0 && p.versioned != static_cast<int>(has_release)) {
            throw IntegrityError(source_name + ": series '" + f[c_id] + "' mixes versioned and unversioned rows (line " +
                                 std::to_string(line_no) + ")");
        }
        p.versioned = has_release;
        if (has_release) {
            try {
                release = parse_date(f[c_release]);
            } catch (const ParseError& e) {
                throw ParseError(source_name + ": " + e.what(), line_no);
            }
        } else {
            const auto it = release_lags.find(f[c_id]);
            release = period + std::chrono::days{it == release_lags.end() ? 1 : it->second};
        }
        const double value = detail::parse_finite(f[c_value], line_no, source_name);
        p.obs.push_back({period, release, value});
        p.lines.push_back(line_no);
    }
    for (auto& [id, p] : pending) {
        // Duplicate detection with line numbers before handing over to VintageSeries.
        std::vector<std::size_t> order(p.obs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const auto& x = p.obs[a];
            const auto& y = p.obs[b];
            if (x.period != y.period) return x.period < y.period;
            if (x.release != y.release) return x.release < y.release;
            return p.lines[a] < p.lines[b];
        });
        for (std::size_t k = 1; k < order.size(); ++k) {
            const auto& x = p.obs[order[k - 1]];
            const auto& y = p.obs[order[k]];
            if (x.period == y.period && x.release == y.release) {
                throw IntegrityError(source_name + ": duplicate (period, release) for series '" + id + "' at line " +
                                     std::to_string(p.lines[order[k]]));
            }
        }
        store.add(VintageSeries(id, std::move(p.obs)));
    }
    return store;
}

inline VintageStore load_vintage_csv(const std::string& path, const ColumnMapping& schema = {},
                                     const std::map<std::string, int>& release_lags = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open vintage file '" + path + "'");
    return load_vintage_csv(in, schema, release_lags, path);
}

inline void write_vintage_csv(std::ostream& out, const VintageStore& store) {
    out << "series_id,period,release,value\n";
    char buf[64];
    for (const auto& [id, s] : store.all()) {
        for (const auto& o : s.observations()) {
            std::snprintf(buf, sizeof buf, "%.17g", o.value);
            out << id << ',' << format_date(o.period) << ',' << format_date(o.release) << ',' << buf << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Frequency conversion and variable transforms

/// `quarterly` means the source already has one observation per quarter (dated anywhere in it).
enum class Aggregation { last, mean, quarterly };

/// Converts a dated series to quarterly frequency.
///
/// For `last` and `mean`, a quarter is emitted only when the source has an observation
/// dated within the final 7 days of the quarter, so partially observed quarters never appear.
inline QuarterMap to_quarterly(const DatedSeries& s, Aggregation agg = Aggregation::last) {
    QuarterMap out;
    if (agg == Aggregation::quarterly) {
        for (const auto& [d, v] : s) out[Quarter::containing(d)] = v;
        return out;
    }
    auto it = s.begin();
    while (it != s.end()) {
        const Quarter q = Quarter::containing(it->first);
        const Date cutoff = q.end_date() - std::chrono::days{7};
        double sum = 0, last = 0;
        int count = 0;
        bool complete = false;
        for (; it != s.end() && Quarter::containing(it->first) == q; ++it) {
            sum += it->second;
            last = it->second;
            ++count;
            complete = complete || it->first >= cutoff;
        }
        if (complete) out.emplace_hint(out.end(), q, agg == Aggregation::last ? last : sum / count);
    }
    return out;
}

enum class TransformStep { natural_log, first_difference, subtract_second, take_second_if_first_missing };

struct TransformSpec {
    std::vector<TransformStep> steps;
    int extra_differencing = 0;

    bool uses_second_series() const {
        return std::any_of(steps.begin(), steps.end(), [](TransformStep s) {
            return s == TransformStep::subtract_second || s == TransformStep::take_second_if_first_missing;
        });
    }
    int difference_count() const {
        return static_cast<int>(std::count(steps.begin(), steps.end(), TransformStep::first_difference)) +
               extra_differencing;
    }
};

enum class Role { dependent, factor, control };

struct VariableDef {
    std::string name;
    std::vector<std::string> sources;  // one or two series ids
    TransformSpec transform;
    Role role = Role::factor;
    Aggregation aggregation = Aggregation::last;

    /// Copy with `k` extra differences; the name gets the "(d)", "(dd)", ... suffix.
    VariableDef with_differencing(int k) const {
        VariableDef v = *this;
        v.transform.extra_differencing += k;
        if (k > 0) v.name += " (" + std::string(static_cast<std::size_t>(k), 'd') + ")";
        return v;
    }
};

namespace detail {

inline QuarterMap difference(const QuarterMap& s) {
    QuarterMap out;
    for (auto it = s.begin(); it != s.end(); ++it) {
        if (it == s.begin()) continue;
        const auto prev = std::prev(it);
        if (prev->first == it->first - 1) out.emplace_hint(out.end(), it->first, it->second - prev->second);
    }
    return out;
}

inline void log_in_place(QuarterMap& s, const std::string& label) {
    for (auto& [q, v] : s) {
        if (!(v > 0)) {
            throw DomainError("natural log of non-positive value " + std::to_string(v) + " in '" + label + "' at " +
                              q.label());
        }
        v = std::log(v);
    }
}

}  // namespace detail

/// Applies a variable's calculation steps and differencing to quarterly inputs.
///
/// `natural_log` applies to the companion series too while it is still separate, so
/// "natural log, subtract second from first" yields a log ratio.
inline QuarterMap apply_transform(const QuarterMap& primary, const VariableDef& def,
                                  const QuarterMap* companion = nullptr) {
    const bool needs_second = def.transform.uses_second_series();
    if (needs_second && !companion) throw ConfigError("variable '" + def.name + "' needs a second series");
    if (!needs_second && companion) throw ConfigError("variable '" + def.name + "' takes a single series");

    QuarterMap a = primary;
    std::optional<QuarterMap> b;
    if (companion) b = *companion;
    for (TransformStep step : def.transform.steps) {
        switch (step) {
            case TransformStep::natural_log:
                detail::log_in_place(a, def.name);
                if (b) detail::log_in_place(*b, def.name + " (second series)");
                break;
            case TransformStep::first_difference:
                a = detail::difference(a);
                if (b) *b = detail::difference(*b);
                break;
            case TransformStep::subtract_second: {
                if (!b) throw ConfigError("variable '" + def.name + "': second series already consumed");
                QuarterMap out;
                for (const auto& [q, v] : a) {
                    if (auto it = b->find(q); it != b->end()) out.emplace_hint(out.end(), q, v - it->second);
                }
                a = std::move(out);
                b.reset();
                break;
            }
            case TransformStep::take_second_if_first_missing: {
                if (!b) throw ConfigError("variable '" + def.name + "': second series already consumed");
                for (const auto& [q, v] : *b) a.emplace(q, v);
                b.reset();
                break;
            }
        }
    }
    for (int k = 0; k < def.transform.extra_differencing; ++k) a = detail::difference(a);
    return a;
}

/// Longest gap-free run ending at the last available quarter; history before a gap is dropped.
inline QuarterlySeries trailing_contiguous(const QuarterMap& s) {
    QuarterlySeries out;
    if (s.empty()) return out;
    auto it = std::prev(s.end());
    Quarter first = it->first;
    while (it != s.begin()) {
        auto prev = std::prev(it);
        if (prev->first != it->first - 1) break;
        first = prev->first;
        it = prev;
    }
    out.first = first;
    for (auto jt = s.find(first); jt != s.end(); ++jt) out.values.push_back(jt->second);
    return out;
}

/// Transformed, gap-free quarterly view of a variable using only releases dated <= d.
inline QuarterlySeries transformed_as_of(const VintageStore& store, const VariableDef& def, Date d) {
    if (def.sources.empty() || def.sources.size() > 2) {
        throw ConfigError("variable '" + def.name + "' must reference one or two series");
    }
    const QuarterMap first = to_quarterly(store.at(def.sources[0]).as_of(d), def.aggregation);
    if (def.sources.size() == 2) {
        const QuarterMap second = to_quarterly(store.at(def.sources[1]).as_of(d), def.aggregation);
        return trailing_contiguous(apply_transform(first, def, &second));
    }
    return trailing_contiguous(apply_transform(first, def, nullptr));
}

}  // namespace lvpc

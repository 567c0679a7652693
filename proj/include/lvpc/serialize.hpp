#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <vector>

#include "lvpc/benchmarks.hpp"
#include "lvpc/lsr.hpp"

// JSON documents for fitted models. Field names follow the struct members.

namespace lvpc {

namespace detail {
inline nlohmann::json to_array(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}
inline Eigen::VectorXd from_array(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace detail

namespace lsr {

inline void to_json(nlohmann::json& j, const LsrFit& f) {
    j = nlohmann::json{{"type", "lsr"},
                       {"n", f.n},
                       {"F", f.F},
                       {"c", f.c},
                       {"beta", lvpc::detail::to_array(f.beta)},
                       {"omega", lvpc::detail::to_array(f.omega)},
                       {"rho", f.rho},
                       {"xtilde_mean", f.xtilde_mean},
                       {"last_residual", f.last_residual},
                       {"iterations", f.iterations},
                       {"converged", f.converged},
                       {"objective", f.objective}};
    j["phi"] = f.phi ? nlohmann::json(*f.phi) : nlohmann::json(nullptr);
    j["theta"] = f.theta ? nlohmann::json(*f.theta) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, LsrFit& f) {
    f.n = j.at("n").get<int>();
    f.F = j.at("F").get<int>();
    f.c = j.at("c").get<double>();
    f.beta = lvpc::detail::from_array(j.at("beta"));
    f.omega = lvpc::detail::from_array(j.at("omega"));
    f.rho = j.at("rho").get<double>();
    f.xtilde_mean = j.at("xtilde_mean").get<double>();
    f.last_residual = j.value("last_residual", 0.0);
    f.iterations = j.at("iterations").get<int>();
    f.converged = j.at("converged").get<bool>();
    f.objective = j.at("objective").get<double>();
    f.phi = j.contains("phi") && !j["phi"].is_null() ? std::optional<double>(j["phi"].get<double>()) : std::nullopt;
    f.theta = j.contains("theta") && !j["theta"].is_null() ? std::optional<double>(j["theta"].get<double>()) : std::nullopt;
}

}  // namespace lsr

namespace bench {

inline void to_json(nlohmann::json& j, const BenchFit& f) {
    nlohmann::json coefs = nlohmann::json::object();
    for (const auto& [k, v] : f.coefficients()) coefs[k] = v;
    j = nlohmann::json{{"type", "bench"},
                       {"kind", kind_name(f.kind)},
                       {"horizon", f.horizon},
                       {"ar_order", f.ar_order},
                       {"c", f.c},
                       {"beta", lvpc::detail::to_array(f.beta)},
                       {"phi", lvpc::detail::to_array(f.phi)},
                       {"last_residual", f.last_residual},
                       {"converged", f.converged},
                       {"iterations", f.iterations},
                       {"coefficients", coefs}};
    j["theta"] = f.theta ? nlohmann::json(*f.theta) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, BenchFit& f) {
    const auto kind = j.at("kind").get<std::string>();
    bool found = false;
    for (auto k : {BenchKind::EWMA, BenchKind::AR, BenchKind::MA1, BenchKind::ARMA11, BenchKind::X, BenchKind::ARX,
                   BenchKind::MAX, BenchKind::ARMAX}) {
        if (kind == kind_name(k)) {
            f.kind = k;
            found = true;
        }
    }
    if (!found) throw ParseError("unknown fit kind '" + kind + "'", 0);
    f.horizon = j.at("horizon").get<int>();
    f.ar_order = j.at("ar_order").get<int>();
    f.c = j.at("c").get<double>();
    f.beta = lvpc::detail::from_array(j.at("beta"));
    f.phi = lvpc::detail::from_array(j.at("phi"));
    f.last_residual = j.value("last_residual", 0.0);
    f.converged = j.at("converged").get<bool>();
    f.iterations = j.value("iterations", 0);
    f.theta = j.contains("theta") && !j["theta"].is_null() ? std::optional<double>(j["theta"].get<double>()) : std::nullopt;
}

}  // namespace bench

}  // namespace lvpc

#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "sclab/fowler.hpp"
#include "sclab/identities.hpp"
#include "sclab/kmfactory.hpp"
#include "sclab/morse.hpp"
#include "sclab/solver.hpp"

namespace sclab {

using json = nlohmann::json;

inline json to_json(const SpherePoint& p) {
    json a = json::array();
    for (int i = 0; i < p.coords.size(); ++i) a.push_back(p.coords[i]);
    return a;
}

inline json to_json(const CriticalPointRecord& r) {
    return json{{"location", to_json(r.location)},
                {"value", r.value},
                {"morse_index", r.morse_index},
                {"laplacian", r.laplacian},
                {"hessian_margin", r.hessian_margin}};
}

inline json to_json(const MorseReport& r) {
    json recs = json::array();
    for (const auto& rec : r.records) recs.push_back(to_json(rec));
    return json{{"records", recs},
                {"counts", r.counts},
                {"nd_margin", r.nd_margin},
                {"euler_check", r.euler_check}};
}

inline json to_json(const PinchVerdict& v) {
    return json{{"holds", v.holds}, {"boundary", v.boundary}};
}

inline json to_json(const PinchReport& r) {
    json pm = json::array(), tpm = json::array();
    for (const auto& v : r.holds_Pm) pm.push_back(to_json(v));
    for (const auto& v : r.holds_tPm) tpm.push_back(to_json(v));
    return json{{"K_max", r.K_max},
                {"K_min", r.K_min},
                {"ordered_values", r.ordered_values},
                {"E_lower", r.E_lower},
                {"E_upper", r.E_upper},
                {"holds_Pm", pm},
                {"holds_tPm", tpm}};
}

inline json to_json(const RadialAverageCurve& c) {
    return json{{"radii", c.radii}, {"wbar", c.wbar}, {"critical_radii", c.critical_radii}};
}

inline void write_csv(const RadialAverageCurve& c, std::ostream& os) {
    os << "r,wbar\n";
    os.precision(17);
    for (std::size_t i = 0; i < c.radii.size(); ++i) os << c.radii[i] << ',' << c.wbar[i] << '\n';
}

inline json to_json(const PohozaevReport& r) {
    return json{{"volume_term", r.volume_term},
                {"boundary_K_term", r.boundary_K_term},
                {"boundary_B_term", r.boundary_B_term},
                {"subcritical_term", r.subcritical_term},
                {"residual", r.residual},
                {"tolerance_estimate", r.tolerance_estimate}};
}

inline json to_json(const FluxReport& r) {
    return json{{"flux", r.flux}, {"omega_n_H", r.omega_n_H}, {"residual", r.residual}};
}

inline json to_json(const ContinuationReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back(json{{"tau", row.tau},
                            {"J", row.J},
                            {"theta_peak", row.theta_peak},
                            {"peak", row.peak},
                            {"lambda_est", row.lambda_est},
                            {"converged", row.converged}});
    return json{{"rows", rows},
                {"slope", r.slope},
                {"J_extrapolated", r.J_extrapolated},
                {"limit_energy_q1", r.limit_energy_q1},
                {"laplacian_at_peak", r.laplacian_at_peak},
                {"c2_mean", r.c2_mean},
                {"c2_cv", r.c2_cv},
                {"completed", r.completed}};
}

inline json to_json(const KmVerification& v) {
    return json{{"counts_match", v.counts_match},
                {"single_max_at_north", v.single_max_at_north},
                {"cluster_shrinks", v.cluster_shrinks},
                {"laplacian_uniform", v.laplacian_uniform},
                {"c3_decay", v.c3_decay},
                {"c_constant", v.c_constant},
                {"u_cut", v.u_cut},
                {"max_location_error", v.max_location_error},
                {"cluster_radius", v.cluster_radius},
                {"min_laplacian_U", v.min_laplacian_U},
                {"c3_distance", v.c3_distance},
                {"failures", v.failures},
                {"all_pass", v.all_pass()}};
}

inline json to_json(const KmParams& p) {
    return json{{"n", p.n},
                {"template", p.template_name},
                {"eps0", p.eps0},
                {"delta0", p.delta0},
                {"khat", p.khat},
                {"eps_ratio", p.eps_ratio},
                {"t_ratio", p.t_ratio},
                {"target_counts", p.target_counts}};
}

inline void write_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << j.dump(2) << '\n';
}

inline json read_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    json j;
    f >> j;
    return j;
}

} // namespace sclab

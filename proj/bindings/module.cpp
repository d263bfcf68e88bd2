#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <optional>

#include "oasis/design.hpp"
#include "oasis/error.hpp"
#include "oasis/estimator.hpp"
#include "oasis/graph.hpp"
#include "oasis/qp.hpp"
#include "oasis/sim.hpp"

namespace py = pybind11;
using namespace oasis;

namespace {

RiskParams risk_from_dict(const py::dict& d) {
    RiskParams r;
    if (d.contains("r_min")) r.r_min = d["r_min"].cast<double>();
    if (d.contains("r_max")) r.r_max = d["r_max"].cast<double>();
    if (d.contains("s_min")) r.s_min = d["s_min"].cast<double>();
    if (d.contains("s_max")) r.s_max = d["s_max"].cast<double>();
    return r;
}

DesignConfig design_config_from_dict(const py::dict& d) {
    DesignConfig c;
    if (d.contains("rho")) c.qp.rho = d["rho"].cast<double>();
    if (d.contains("sigma")) c.qp.sigma = d["sigma"].cast<double>();
    if (d.contains("relax_alpha")) c.qp.relax_alpha = d["relax_alpha"].cast<double>();
    if (d.contains("eps_abs")) c.qp.eps_abs = d["eps_abs"].cast<double>();
    if (d.contains("eps_rel")) c.qp.eps_rel = d["eps_rel"].cast<double>();
    if (d.contains("max_iter")) c.qp.max_iter = d["max_iter"].cast<int>();
    if (d.contains("k_blocks")) c.k_blocks = d["k_blocks"].cast<int>();
    if (d.contains("max_outer")) c.max_outer = d["max_outer"].cast<int>();
    if (d.contains("alpha_override"))
        c.alpha_override = d["alpha_override"].cast<double>();
    return c;
}

EstimatorConfig estimator_config_from_dict(const py::dict& d) {
    EstimatorConfig c;
    if (d.contains("bootstrap_b")) c.bootstrap_b = d["bootstrap_b"].cast<int>();
    if (d.contains("alpha")) c.alpha = d["alpha"].cast<double>();
    if (d.contains("clip")) c.clip = d["clip"].cast<double>();
    if (d.contains("self_normalized"))
        c.mode = d["self_normalized"].cast<bool>() ? EstimateMode::SelfNormalized
                                                   : EstimateMode::Plain;
    if (d.contains("seed")) c.seed = d["seed"].cast<std::uint64_t>();
    return c;
}

py::dict report_to_dict(const EstimateReport& r) {
    py::list arms;
    for (const ArmEstimate& a : r.arms)
        arms.append(py::dict(py::arg("r") = a.arm, py::arg("tau_hat") = a.tau_hat,
                             py::arg("sigma_hat") = a.sigma_hat,
                             py::arg("ci") = py::make_tuple(a.ci_lo, a.ci_hi)));
    py::list effects;
    for (const EffectEstimate& e : r.effects)
        effects.append(py::dict(py::arg("r") = e.arm, py::arg("diff") = e.diff,
                                py::arg("ci") = py::make_tuple(e.ci_lo, e.ci_hi)));
    py::dict out;
    out["arms"] = arms;
    out["effects"] = effects;
    out["diagnostics"] =
        py::dict(py::arg("max_weight") = r.max_weight, py::arg("ess") = r.ess,
                 py::arg("dropped_replicates") = r.dropped_replicates);
    if (r.has_shadow)
        out["shadow"] = py::dict(py::arg("diff") = r.shadow_diff,
                                 py::arg("ci") = py::make_tuple(r.shadow_ci_lo, r.shadow_ci_hi));
    else
        out["shadow"] = py::none();
    return out;
}

SimConfig sim_config_from_dict(const py::dict& d) {
    SimConfig c;
    if (d.contains("n_clusters")) c.graph.n_clusters = d["n_clusters"].cast<int>();
    if (d.contains("cluster_size")) c.graph.cluster_size = d["cluster_size"].cast<int>();
    if (d.contains("d_ba")) c.graph.d_ba = d["d_ba"].cast<double>();
    if (d.contains("ba_power")) c.graph.ba_power = d["ba_power"].cast<double>();
    if (d.contains("d_er")) c.graph.d_er = d["d_er"].cast<double>();
    if (d.contains("delta")) c.delta = d["delta"].cast<double>();
    if (d.contains("frac_omega")) c.frac_omega = d["frac_omega"].cast<double>();
    if (d.contains("frac_lambda")) c.frac_lambda = d["frac_lambda"].cast<double>();
    if (d.contains("q")) c.q = d["q"].cast<double>();
    if (d.contains("risk")) c.risk = risk_from_dict(d["risk"].cast<py::dict>());
    if (d.contains("solver")) c.design = design_config_from_dict(d["solver"].cast<py::dict>());
    if (d.contains("alpha_override_one"))
        c.alpha_override_one = d["alpha_override_one"].cast<bool>();
    if (d.contains("estimator"))
        c.estimator = estimator_config_from_dict(d["estimator"].cast<py::dict>());
    if (d.contains("repeats")) c.repeats = d["repeats"].cast<int>();
    if (d.contains("seed")) c.seed = d["seed"].cast<std::uint64_t>();
    if (d.contains("threads")) c.threads = d["threads"].cast<int>();
    return c;
}

}  // namespace

PYBIND11_MODULE(_oasis, m) {
    m.doc() = "Experiment design and effect estimation on marketplace graphs "
              "under network interference";

    py::register_exception<Error>(m, "OasisError");

    py::class_<MarketplaceGraph>(m, "Graph")
        .def_property_readonly("n_nodes", &MarketplaceGraph::n_nodes)
        .def_property_readonly("n_edges", &MarketplaceGraph::n_edges)
        .def_property_readonly("mean_in_degree", &MarketplaceGraph::mean_in_degree)
        .def("cluster_of", &MarketplaceGraph::cluster_of)
        .def("in_degree", &MarketplaceGraph::in_degree)
        .def("out_degree", &MarketplaceGraph::out_degree)
        .def("edges",
             [](const MarketplaceGraph& g) {
                 py::list out;
                 for (const Edge& e : g.edges())
                     out.append(py::make_tuple(e.src, e.dst, e.p_base, e.alpha));
                 return out;
             })
        .def("__repr__", [](const MarketplaceGraph& g) {
            return "<oasis.Graph nodes=" + std::to_string(g.n_nodes()) +
                   " edges=" + std::to_string(g.n_edges()) + ">";
        });

    py::class_<TreatmentSet>(m, "TreatmentSet")
        .def_readonly("n_arms", &TreatmentSet::n_arms)
        .def("weights", [](const TreatmentSet& t, int arm) { return t.weights.at(arm); });

    py::class_<Partition>(m, "Partition")
        .def_readonly("n_arms", &Partition::n_arms)
        .def_readonly("q", &Partition::q)
        .def_property_readonly("omega", [](const Partition& p) { return p.omega; })
        .def_property_readonly("lambda_", [](const Partition& p) { return p.lambda; })
        .def_property_readonly("c_prime", [](const Partition& p) { return p.c_prime; });

    py::class_<DesignOutput>(m, "Design")
        .def_readonly("p_star", &DesignOutput::p_star)
        .def_readonly("objective_trace", &DesignOutput::objective_trace)
        .def_readonly("block_solves", &DesignOutput::block_solves)
        .def_property_readonly("partition",
                               [](const DesignOutput& d) { return d.partition; })
        .def("provenance", [](const DesignOutput& d) {
            py::list out;
            for (Provenance p : d.provenance) out.append(provenance_name(p));
            return out;
        });

    m.def("generate_clustered_graph", &generate_clustered_graph, py::arg("n_clusters"),
          py::arg("cluster_size"), py::arg("d_ba"), py::arg("ba_power") = 0.25,
          py::arg("d_er") = 0.0, py::arg("seed") = 1);

    m.def("generate_attributes", &generate_attributes, py::arg("graph"), py::arg("seed") = 1);

    m.def("validate", [](const MarketplaceGraph& g, const TreatmentSet& t) {
        py::list out;
        for (const Violation& v : validate(g, t).violations) out.append(v.describe());
        return out;
    });

    m.def(
        "save",
        [](const MarketplaceGraph& g, const TreatmentSet& t, const std::string& dir) {
            save(g, t, dir);
        },
        py::arg("graph"), py::arg("treatments"), py::arg("dir"));
    m.def("load", [](const std::string& dir) { return load(dir); });

    m.def(
        "sample_partition",
        [](const MarketplaceGraph& g, int n_arms, double frac_omega, double frac_lambda,
           double q, std::uint64_t seed) {
            return sample_partition(g, n_arms, frac_omega, frac_lambda, q, seed);
        },
        py::arg("graph"), py::arg("n_arms"), py::arg("frac_omega"), py::arg("frac_lambda"),
        py::arg("q"), py::arg("seed") = 1);

    m.def(
        "assemble_design",
        [](const MarketplaceGraph& g, const TreatmentSet& t, const Partition& p,
           const py::dict& risk, const py::dict& config) {
            return assemble_design(g, t, p, risk_from_dict(risk),
                                   design_config_from_dict(config));
        },
        py::arg("graph"), py::arg("treatments"), py::arg("partition"),
        py::arg("risk") = py::dict(), py::arg("config") = py::dict());

    m.def(
        "compute_boost_factors",
        [](const MarketplaceGraph& g, const DesignOutput& d, const std::vector<double>& scores) {
            return compute_boost_factors(g, d, scores).b;
        },
        py::arg("graph"), py::arg("design"), py::arg("scores"));

    m.def(
        "solve_qp",
        [](int n_vars, const std::vector<std::tuple<int, int, double>>& p,
           const std::vector<double>& q, const std::vector<std::tuple<int, int, double>>& a,
           const std::vector<double>& lower, const std::vector<double>& upper,
           double objective_const, const py::dict& config) {
            QpProblem prob;
            prob.n_vars = n_vars;
            prob.n_cons = static_cast<int>(lower.size());
            prob.objective_const = objective_const;
            for (const auto& [r, c, v] : p) prob.p.push_back({r, c, v});
            for (const auto& [r, c, v] : a) prob.a.push_back({r, c, v});
            prob.q = q;
            prob.lower = lower;
            prob.upper = upper;
            QpConfig qc = design_config_from_dict(config).qp;
            const QpSolution sol = solve_qp(prob, qc);
            py::dict out;
            out["x"] = sol.x;
            out["objective"] = sol.objective_value;
            out["iterations"] = sol.iterations;
            out["status"] = sol.status == QpStatus::Solved
                                ? "solved"
                                : (sol.status == QpStatus::MaxIter ? "max_iter" : "infeasible");
            out["primal_residual"] = sol.primal_residual;
            out["dual_residual"] = sol.dual_residual;
            return out;
        },
        py::arg("n_vars"), py::arg("p"), py::arg("q"), py::arg("a"), py::arg("lower"),
        py::arg("upper"), py::arg("objective_const") = 0.0, py::arg("config") = py::dict());

    m.def(
        "ground_truth",
        [](const MarketplaceGraph& g, const TreatmentSet& t, double delta) {
            const GroundTruth gt = ground_truth(g, t, delta, ResponseModel{});
            py::dict out;
            out["tau"] = gt.tau;
            out["diff"] = gt.diff;
            return out;
        },
        py::arg("graph"), py::arg("treatments"), py::arg("delta") = 1.0);

    // Post-experiment estimation for a deployed design, given observed
    // responses under the design weights.
    m.def(
        "run_estimate",
        [](const MarketplaceGraph& g, const TreatmentSet& t, const DesignOutput& design,
           double delta, const std::vector<double>& responses, const py::dict& config) {
            MediatorValues med;
            med.z_star_edge.resize(g.n_edges());
            med.z_arm_edge.assign(t.n_arms, std::vector<double>(g.n_edges()));
            for (EdgeId e = 0; e < g.n_edges(); ++e) {
                const double a = g.edge(e).alpha;
                const double ps = design.p_star[e];
                med.z_star_edge[e] = a * (ps <= 0.0 ? 0.0 : std::pow(ps, delta));
                for (int r = 0; r < t.n_arms; ++r) {
                    const double pr = t.p(r, e);
                    med.z_arm_edge[r][e] = a * (pr <= 0.0 ? 0.0 : std::pow(pr, delta));
                }
            }
            const ExposureSample sample = collect_exposures(g, design.partition, med);
            const EstimateReport report = bootstrap_ci(design.partition, sample, responses,
                                                       estimator_config_from_dict(config));
            return report_to_dict(report);
        },
        py::arg("graph"), py::arg("treatments"), py::arg("design"), py::arg("delta"),
        py::arg("responses"), py::arg("config") = py::dict());

    m.def(
        "simulate",
        [](const py::dict& config) {
            const SimOutput out = run_simulation(sim_config_from_dict(config));
            py::list rows;
            for (const TrialResult& r : out.results)
                rows.append(py::dict(
                    py::arg("repeat") = r.repeat,
                    py::arg("method") = std::string(trial_method_name(r.method)),
                    py::arg("estimate") = r.estimate, py::arg("truth") = r.truth,
                    py::arg("error") = r.error(),
                    py::arg("ci") = py::make_tuple(r.ci_lo, r.ci_hi),
                    py::arg("covered") = r.covered));
            py::list summary;
            for (const MethodSummary& s : out.summary)
                summary.append(py::dict(
                    py::arg("method") = std::string(trial_method_name(s.method)),
                    py::arg("n") = s.n, py::arg("coverage") = s.coverage,
                    py::arg("mean_error") = s.mean_error,
                    py::arg("median_error") = s.median_error));
            py::dict res;
            res["truth"] = py::dict(py::arg("tau") = out.truth.tau,
                                    py::arg("diff") = out.truth.diff);
            res["results"] = rows;
            res["summary"] = summary;
            return res;
        },
        py::arg("config") = py::dict());
}

#include "oasis/qp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "oasis/error.hpp"
#include "oasis/tsv.hpp"

namespace oasis {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kEqTol = 1e-14;        // l == u classification
constexpr double kRhoEqFactor = 1e3;    // stiffer rho on equality rows
constexpr double kEpsPrimInf = 1e-7;

SpMat from_triplets(int rows, int cols, const std::vector<Triplet>& ts) {
    std::vector<Eigen::Triplet<double>> e;
    e.reserve(ts.size());
    for (const Triplet& t : ts) {
        if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
            throw ParameterError("triplet index out of range");
        e.emplace_back(t.row, t.col, t.value);
    }
    SpMat m(rows, cols);
    m.setFromTriplets(e.begin(), e.end());
    return m;
}

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

Vec col_inf_norms(const SpMat& m) {
    Vec out = Vec::Zero(m.cols());
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it)
            out[it.col()] = std::max(out[it.col()], std::abs(it.value()));
    return out;
}

Vec row_inf_norms(const SpMat& m) {
    Vec out = Vec::Zero(m.rows());
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it)
            out[it.row()] = std::max(out[it.row()], std::abs(it.value()));
    return out;
}

struct Scaling {
    Vec d;      // variable scaling
    Vec e;      // constraint scaling
    double c = 1.0;  // cost scaling
};

// Modified Ruiz equilibration of [[P, A'],[A, 0]] plus cost normalization.
Scaling ruiz_equilibrate(SpMat& P, Vec& q, SpMat& A, Vec& l, Vec& u, int iters) {
    const int n = static_cast<int>(P.rows());
    const int m = static_cast<int>(A.rows());
    Scaling s{Vec::Ones(n), Vec::Ones(m), 1.0};
    for (int it = 0; it < iters; ++it) {
        const Vec np = col_inf_norms(P);
        const Vec na_col = col_inf_norms(A);
        const Vec na_row = row_inf_norms(A);
        Vec d(n), e(m);
        for (int i = 0; i < n; ++i) {
            const double norm = std::max(np[i], na_col[i]);
            d[i] = norm > 0.0 ? 1.0 / std::sqrt(std::clamp(norm, kMinScaling, kMaxScaling)) : 1.0;
        }
        for (int j = 0; j < m; ++j) {
            const double norm = na_row[j];
            e[j] = norm > 0.0 ? 1.0 / std::sqrt(std::clamp(norm, kMinScaling, kMaxScaling)) : 1.0;
        }
        P = d.asDiagonal() * P * d.asDiagonal();
        q = d.cwiseProduct(q);
        A = e.asDiagonal() * A * d.asDiagonal();
        l = e.cwiseProduct(l);
        u = e.cwiseProduct(u);
        s.d = s.d.cwiseProduct(d);
        s.e = s.e.cwiseProduct(e);

        const Vec np2 = col_inf_norms(P);
        const double mean_np = n > 0 ? np2.sum() / n : 0.0;
        const double denom = std::max(mean_np, inf_norm(q));
        const double gamma = denom > 0.0 ? 1.0 / std::clamp(denom, kMinScaling, kMaxScaling) : 1.0;
        P *= gamma;
        q *= gamma;
        s.c *= gamma;
    }
    return s;
}

class KktSolver {
  public:
    KktSolver(const SpMat& P, const SpMat& A, double sigma)
        : n_(static_cast<int>(P.rows())), m_(static_cast<int>(A.rows())), P_(&P), A_(&A),
          sigma_(sigma) {}

    void factor(const Vec& rho) {
        std::vector<Eigen::Triplet<double>> ts;
        ts.reserve(P_->nonZeros() + 2 * A_->nonZeros() + n_ + m_);
        for (int k = 0; k < P_->outerSize(); ++k)
            for (SpMat::InnerIterator it(*P_, k); it; ++it)
                ts.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                it.value());
        for (int i = 0; i < n_; ++i) ts.emplace_back(i, i, sigma_);
        for (int k = 0; k < A_->outerSize(); ++k)
            for (SpMat::InnerIterator it(*A_, k); it; ++it) {
                const int r = static_cast<int>(it.row());
                const int c = static_cast<int>(it.col());
                ts.emplace_back(n_ + r, c, it.value());
                ts.emplace_back(c, n_ + r, it.value());
            }
        for (int j = 0; j < m_; ++j) ts.emplace_back(n_ + j, n_ + j, -1.0 / rho[j]);
        SpMat kkt(n_ + m_, n_ + m_);
        kkt.setFromTriplets(ts.begin(), ts.end());
        kkt_nnz_ = kkt.nonZeros();
        if (!analyzed_) {
            ldlt_.analyzePattern(kkt);
            analyzed_ = true;
        }
        ldlt_.factorize(kkt);
        if (ldlt_.info() != Eigen::Success)
            throw Error("KKT factorization failed (quasi-definite system expected)");
    }

    void solve(const Vec& rhs_x, const Vec& rhs_z, Vec& out_x, Vec& out_nu) const {
        Vec rhs(n_ + m_);
        rhs.head(n_) = rhs_x;
        rhs.tail(m_) = rhs_z;
        const Vec sol = ldlt_.solve(rhs);
        out_x = sol.head(n_);
        out_nu = sol.tail(m_);
    }

    std::uint64_t workspace_bytes() const {
        const auto nnz_l = static_cast<std::uint64_t>(ldlt_.matrixL().nestedExpression().nonZeros());
        // 12 bytes per stored nonzero (value + index), plus the diagonal.
        return 12u * (nnz_l + static_cast<std::uint64_t>(kkt_nnz_)) +
               8u * static_cast<std::uint64_t>(n_ + m_);
    }

  private:
    int n_;
    int m_;
    const SpMat* P_;
    const SpMat* A_;
    double sigma_;
    Eigen::Index kkt_nnz_ = 0;
    bool analyzed_ = false;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt_;
};

Vec build_rho_vec(double rho_bar, const Vec& l, const Vec& u) {
    Vec rho(l.size());
    for (int j = 0; j < l.size(); ++j)
        rho[j] = (u[j] - l[j] <= kEqTol) ? rho_bar * kRhoEqFactor : rho_bar;
    return rho;
}

// Unconstrained case: proximal-point iterations on (P + sigma I).
QpSolution solve_unconstrained(const SpMat& P, const Vec& q, double objective_const,
                               const QpConfig& config, const std::optional<WarmStart>& warm) {
    const int n = static_cast<int>(P.rows());
    SpMat reg = P;
    std::vector<Eigen::Triplet<double>> ts;
    for (int i = 0; i < n; ++i) ts.emplace_back(i, i, config.sigma);
    SpMat sig(n, n);
    sig.setFromTriplets(ts.begin(), ts.end());
    reg = reg + sig;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt(reg);
    if (ldlt.info() != Eigen::Success) throw Error("factorization failed");
    Vec x = Vec::Zero(n);
    if (warm && !warm->x.empty()) x = Eigen::Map<const Vec>(warm->x.data(), n);
    QpSolution sol;
    for (int k = 0; k < config.max_iter; ++k) {
        x = ldlt.solve(config.sigma * x - q);
        sol.iterations = k + 1;
        const double r = inf_norm(P * x + q);
        sol.dual_residual = r;
        if (r <= config.eps_abs + config.eps_rel * inf_norm(q)) {
            sol.status = QpStatus::Solved;
            break;
        }
    }
    sol.x.assign(x.data(), x.data() + n);
    sol.objective_value = 0.5 * x.dot(P * x) + q.dot(x) + objective_const;
    return sol;
}

}  // namespace

void QpProblem::dump(const std::filesystem::path& path) const {
    tsv::Writer w(path);
    w.line("# qp n_vars=" + std::to_string(n_vars) + " n_cons=" + std::to_string(n_cons));
    w.line("P");
    for (const Triplet& t : p)
        w.line(std::to_string(t.row) + "\t" + std::to_string(t.col) + "\t" + tsv::fmt17(t.value));
    w.line("q");
    for (int i = 0; i < n_vars; ++i) w.line(tsv::fmt17(q[i]));
    w.line("A");
    for (const Triplet& t : a)
        w.line(std::to_string(t.row) + "\t" + std::to_string(t.col) + "\t" + tsv::fmt17(t.value));
    w.line("l");
    for (int j = 0; j < n_cons; ++j) w.line(tsv::fmt17(lower[j]));
    w.line("u");
    for (int j = 0; j < n_cons; ++j) w.line(tsv::fmt17(upper[j]));
    w.close();
}

QpSolution solve_qp(const QpProblem& problem, const QpConfig& config,
                    const std::optional<WarmStart>& warm) {
    const int n = problem.n_vars;
    const int m = problem.n_cons;
    if (static_cast<int>(problem.q.size()) != n)
        throw ParameterError("q size does not match n_vars");
    if (static_cast<int>(problem.lower.size()) != m ||
        static_cast<int>(problem.upper.size()) != m)
        throw ParameterError("bound size does not match n_cons");
    for (int j = 0; j < m; ++j)
        if (problem.lower[j] > problem.upper[j])
            throw ParameterError("lower bound exceeds upper bound at row " + std::to_string(j));

    QpSolution sol;
    if (n == 0) {
        sol.status = QpStatus::Solved;
        sol.objective_value = problem.objective_const;
        return sol;
    }

    const SpMat P0 = from_triplets(n, n, problem.p);
    const SpMat A0 = from_triplets(m, n, problem.a);
    const Vec q0 = Eigen::Map<const Vec>(problem.q.data(), n);

    if (m == 0) return solve_unconstrained(P0, q0, problem.objective_const, config, warm);

    const Vec l0 = Eigen::Map<const Vec>(problem.lower.data(), m);
    const Vec u0 = Eigen::Map<const Vec>(problem.upper.data(), m);

    // Scaled working copies.
    SpMat P = P0;
    SpMat A = A0;
    Vec q = q0, l = l0, u = u0;
    const Scaling sc = ruiz_equilibrate(P, q, A, l, u, config.scaling_iters);

    double rho_bar = config.rho;
    Vec rho = build_rho_vec(rho_bar, l, u);
    Vec rho_inv = rho.cwiseInverse();
    KktSolver kkt(P, A, config.sigma);
    kkt.factor(rho);

    Vec x = Vec::Zero(n), z = Vec::Zero(m), y = Vec::Zero(m);
    if (warm && !warm->x.empty()) {
        if (static_cast<int>(warm->x.size()) != n) throw ParameterError("warm start size mismatch");
        x = Eigen::Map<const Vec>(warm->x.data(), n).cwiseQuotient(sc.d);
        z = (A * x).cwiseMax(l).cwiseMin(u);
        if (!warm->y.empty()) {
            if (static_cast<int>(warm->y.size()) != m)
                throw ParameterError("warm start dual size mismatch");
            y = sc.c * Eigen::Map<const Vec>(warm->y.data(), m).cwiseQuotient(sc.e);
        }
    }

    Vec x_tilde(n), nu(m), z_tilde(m), v(m), y_prev(m);
    const double alpha = config.relax_alpha;

    auto unscaled_x = [&](const Vec& xs) { return Vec(sc.d.cwiseProduct(xs)); };
    auto unscaled_y = [&](const Vec& ys) { return Vec(sc.e.cwiseProduct(ys) / sc.c); };

    int iter = 0;
    while (iter < config.max_iter) {
        y_prev = y;
        kkt.solve(config.sigma * x - q, z - y.cwiseProduct(rho_inv), x_tilde, nu);
        z_tilde = z + (nu - y).cwiseProduct(rho_inv);
        x = alpha * x_tilde + (1.0 - alpha) * x;
        v = alpha * z_tilde + (1.0 - alpha) * z + y.cwiseProduct(rho_inv);
        z = v.cwiseMax(l).cwiseMin(u);
        y = rho.cwiseProduct(v - z);
        ++iter;

        if (iter % config.check_interval != 0 && iter != config.max_iter) continue;

        // Termination on unscaled residuals.
        const Vec xu = unscaled_x(x);
        const Vec zu = z.cwiseQuotient(sc.e);
        const Vec yu = unscaled_y(y);
        const Vec ax = A0 * xu;
        const Vec px = P0 * xu;
        const Vec aty = A0.transpose() * yu;
        const double r_prim = inf_norm(ax - zu);
        const double r_dual = inf_norm(px + q0 + aty);
        const double scale_prim = std::max(inf_norm(ax), inf_norm(zu));
        const double scale_dual = std::max({inf_norm(px), inf_norm(aty), inf_norm(q0)});
        sol.primal_residual = r_prim;
        sol.dual_residual = r_dual;
        if (r_prim <= config.eps_abs + config.eps_rel * scale_prim &&
            r_dual <= config.eps_abs + config.eps_rel * scale_dual) {
            sol.status = QpStatus::Solved;
            break;
        }

        // Primal infeasibility certificate from the dual increment.
        const Vec dy = sc.e.cwiseProduct(y - y_prev) / sc.c;
        const double dy_norm = inf_norm(dy);
        if (dy_norm > 0.0) {
            const double support = u0.dot(dy.cwiseMax(0.0)) + l0.dot(dy.cwiseMin(0.0));
            if (inf_norm(A0.transpose() * dy) <= kEpsPrimInf * dy_norm &&
                support <= -kEpsPrimInf * dy_norm) {
                sol.status = QpStatus::Infeasible;
                sol.infeasibility_certificate = dy_norm;
                break;
            }
        }

        if (config.adaptive_rho && iter < config.max_iter) {
            const double pr = r_prim / std::max(scale_prim, 1e-12);
            const double dr = r_dual / std::max(scale_dual, 1e-12);
            const double ratio = std::sqrt(pr / std::max(dr, 1e-12));
            if (ratio > 5.0 || ratio < 0.2) {
                rho_bar = std::clamp(rho_bar * ratio, 1e-6, 1e6);
                rho = build_rho_vec(rho_bar, l, u);
                rho_inv = rho.cwiseInverse();
                kkt.factor(rho);
            }
        }
    }

    const Vec xu = unscaled_x(x);
    const Vec yu = unscaled_y(y);
    sol.x.assign(xu.data(), xu.data() + n);
    sol.y.assign(yu.data(), yu.data() + m);
    sol.iterations = iter;
    sol.objective_value = 0.5 * xu.dot(P0 * xu) + q0.dot(xu) + problem.objective_const;
    sol.workspace_bytes =
        kkt.workspace_bytes() + 8u * static_cast<std::uint64_t>(3 * n + 6 * m);
    return sol;
}

BlockPlan make_block_plan(int n_consumers, int k_blocks, int max_outer) {
    if (k_blocks < 1) throw ParameterError("k_blocks must be >= 1");
    if (max_outer < 1) throw ParameterError("max_outer must be >= 1");
    BlockPlan plan;
    plan.max_outer = max_outer;
    plan.k_blocks = std::max(1, std::min(k_blocks, std::max(1, n_consumers)));
    plan.blocks.resize(plan.k_blocks);
    for (int c = 0; c < n_consumers; ++c) plan.blocks[c % plan.k_blocks].push_back(c);
    return plan;
}

QpProblem build_qp(const AllocationProblem& problem) {
    const int nv = static_cast<int>(problem.vars.size());
    QpProblem qp;
    qp.n_vars = nv;
    qp.q.assign(nv, 0.0);

    // Group variables by producer to emit the least-squares cliques.
    std::vector<std::vector<int>> by_producer(problem.n_producers);
    for (int v = 0; v < nv; ++v) by_producer[problem.vars[v].producer].push_back(v);

    for (int p = 0; p < problem.n_producers; ++p) {
        const double h = problem.target[p];
        qp.objective_const += h * h;
        const auto& vs = by_producer[p];
        for (int a : vs) {
            const double ca = problem.vars[a].alpha;
            qp.q[a] += -2.0 * ca * h;
            for (int b : vs)
                qp.p.push_back({a, b, 2.0 * ca * problem.vars[b].alpha});
        }
    }

    // Box rows, then per-consumer sum rows (consumers without variables are
    // vacuous and get no row).
    std::vector<std::vector<int>> by_consumer(problem.n_consumers);
    for (int v = 0; v < nv; ++v) by_consumer[problem.vars[v].consumer].push_back(v);
    for (int v = 0; v < nv; ++v) {
        qp.a.push_back({v, v, 1.0});
        qp.lower.push_back(problem.vars[v].lo);
        qp.upper.push_back(problem.vars[v].hi);
    }
    int row = nv;
    for (int c = 0; c < problem.n_consumers; ++c) {
        if (by_consumer[c].empty()) continue;
        for (int v : by_consumer[c]) qp.a.push_back({row, v, 1.0});
        qp.lower.push_back(problem.sum_lo[c]);
        qp.upper.push_back(problem.sum_hi[c]);
        ++row;
    }
    qp.n_cons = row;
    return qp;
}

double allocation_objective(const AllocationProblem& problem, const std::vector<double>& x) {
    if (x.size() != problem.vars.size())
        throw InputError("weight vector does not match variable count");
    std::vector<double> achieved(problem.n_producers, 0.0);
    for (std::size_t v = 0; v < x.size(); ++v)
        achieved[problem.vars[v].producer] += problem.vars[v].alpha * x[v];
    double j = 0.0;
    for (int p = 0; p < problem.n_producers; ++p) {
        const double r = problem.target[p] - achieved[p];
        j += r * r;
    }
    return j;
}

AllocationResult solve_allocation(const AllocationProblem& problem, const BlockPlan& plan,
                                  const QpConfig& config) {
    const int nv = static_cast<int>(problem.vars.size());
    AllocationResult res;
    res.x.resize(nv);
    for (int v = 0; v < nv; ++v) res.x[v] = problem.vars[v].p_base;

    std::vector<std::vector<int>> vars_by_consumer(problem.n_consumers);
    for (int v = 0; v < nv; ++v) vars_by_consumer[problem.vars[v].consumer].push_back(v);

    res.objective_trace.push_back(allocation_objective(problem, res.x));

    // Per-block var lists and cached duals for warm starts across sweeps.
    const int k_eff = static_cast<int>(plan.blocks.size());
    std::vector<std::vector<int>> block_vars(k_eff);
    for (int k = 0; k < k_eff; ++k)
        for (int c : plan.blocks[k]) {
            if (c < 0 || c >= problem.n_consumers)
                throw ParameterError("block plan references unknown consumer");
            for (int v : vars_by_consumer[c]) block_vars[k].push_back(v);
        }
    std::vector<std::vector<double>> y_cache(k_eff);

    std::vector<double> achieved(problem.n_producers);
    for (int outer = 0; outer < plan.max_outer; ++outer) {
        for (int k = 0; k < k_eff; ++k) {
            const auto& bv = block_vars[k];
            if (bv.empty()) continue;

            // Residual targets: freeze every variable outside the block.
            std::fill(achieved.begin(), achieved.end(), 0.0);
            for (int v : bv) achieved[problem.vars[v].producer] += problem.vars[v].alpha * res.x[v];
            // achieved now holds the in-block contribution; full contribution
            // per producer is accumulated next to form Delta = target - rest.
            std::vector<double> full(problem.n_producers, 0.0);
            for (int v = 0; v < nv; ++v)
                full[problem.vars[v].producer] += problem.vars[v].alpha * res.x[v];

            AllocationProblem sub;
            std::vector<int> producer_map(problem.n_producers, -1);
            std::vector<int> consumer_map(problem.n_consumers, -1);
            sub.vars.reserve(bv.size());
            for (int v : bv) {
                const AllocationVar& av = problem.vars[v];
                if (producer_map[av.producer] < 0) {
                    producer_map[av.producer] = sub.n_producers++;
                    sub.target.push_back(problem.target[av.producer] -
                                         (full[av.producer] - achieved[av.producer]));
                }
                if (consumer_map[av.consumer] < 0) {
                    consumer_map[av.consumer] = sub.n_consumers++;
                    sub.sum_lo.push_back(problem.sum_lo[av.consumer]);
                    sub.sum_hi.push_back(problem.sum_hi[av.consumer]);
                }
                AllocationVar copy = av;
                copy.producer = producer_map[av.producer];
                copy.consumer = consumer_map[av.consumer];
                sub.vars.push_back(copy);
            }

            const QpProblem qp = build_qp(sub);
            WarmStart ws;
            ws.x.reserve(bv.size());
            for (int v : bv) ws.x.push_back(res.x[v]);
            ws.y = y_cache[k];
            if (ws.y.size() != static_cast<std::size_t>(qp.n_cons)) ws.y.clear();
            const QpSolution qsol = solve_qp(qp, config, WarmStart(ws));
            if (qsol.status == QpStatus::Infeasible)
                throw DesignError("block " + std::to_string(k) +
                                  " reported infeasible (certificate " +
                                  std::to_string(qsol.infeasibility_certificate) + ")");

            // Accept only if the block solve did not worsen the objective
            // (protects the Gauss-Seidel descent when the solver hits
            // max_iter on a hard block).
            const double j_old = allocation_objective(sub, ws.x);
            const double j_new = allocation_objective(sub, qsol.x);
            if (j_new <= j_old + 1e-12 * (1.0 + j_old)) {
                for (std::size_t i = 0; i < bv.size(); ++i) res.x[bv[i]] = qsol.x[i];
                y_cache[k] = qsol.y;
            }
            ++res.block_solves;
            res.peak_workspace_bytes = std::max(res.peak_workspace_bytes, qsol.workspace_bytes);
            res.objective_trace.push_back(allocation_objective(problem, res.x));
        }
    }
    return res;
}

}  // namespace oasis
